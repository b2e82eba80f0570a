#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "blenda/autodiff.hpp"
#include "blenda/image.hpp"

namespace blenda {

struct ModelConfig {
  int image_size = 32;
  int grid_size = 4;
  int num_classes = 3;
  int embed_dim = 32;
  int feature_dim = 32;
  int discriminator_hidden = 16;

  void validate() const;
  int cells() const { return grid_size * grid_size; }
  int patch_dim() const {
    const int cell = image_size / grid_size;
    return cell * cell * 3;
  }
};

/// Rows are grid cells in row-major order, columns the flattened
/// (row, column, channel) pixels of each cell.
ad::Matrix extract_patches(const ImageBuffer& image, int grid_size);

/// Grid detector: patch embedding, one backbone layer and a per-cell
/// classification head over num_classes + 1 outputs (last = background).
class DetectorModel {
 public:
  DetectorModel() = default;
  DetectorModel(const ModelConfig& config, std::uint64_t seed);

  struct Output {
    ad::Var features;  // cells x feature_dim
    ad::Var logits;    // cells x (num_classes + 1)
  };

  Output forward(ad::Tape& tape, const ImageBuffer& image);

  /// Embedding and backbone weights (everything that produces features).
  std::vector<ad::Parameter*> backbone_parameters();
  std::vector<ad::Parameter*> head_parameters();
  std::vector<ad::Parameter*> parameters();

  const ModelConfig& config() const { return config_; }
  int background_class() const { return config_.num_classes; }

 private:
  ModelConfig config_;
  ad::Parameter embed_w_, embed_b_, backbone_w_, backbone_b_, head_w_, head_b_;
};

enum class AlignmentLevel { space, channel, instance };
inline constexpr std::array<AlignmentLevel, 3> kAlignmentLevels = {
    AlignmentLevel::space, AlignmentLevel::channel, AlignmentLevel::instance};
std::string_view to_string(AlignmentLevel level);

/// Pooled feature summaries fed to the three discriminators.
struct QueryFeatures {
  ad::Var space;     // 1 x feature_dim: mean over cells
  ad::Var channel;   // 1 x cells: mean over feature channels per cell
  ad::Var instance;  // 1 x feature_dim: cell features weighted by foreground probability

  ad::Var at(AlignmentLevel level) const;
};

QueryFeatures extract_queries(const DetectorModel::Output& output, int num_classes);

/// Two-layer perceptron ending in a sigmoid scalar.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::string_view tag, int input_dim, int hidden, std::uint64_t seed);

  /// Unclamped probability that `query` comes from the target side (1x1).
  ad::Var forward(ad::Tape& tape, ad::Var query);
  std::vector<ad::Parameter*> parameters();

 private:
  ad::Parameter w1_, b1_, w2_, b2_;
};

struct DiscriminatorBank {
  Discriminator space, channel, instance;

  DiscriminatorBank() = default;
  DiscriminatorBank(const ModelConfig& config, std::uint64_t seed);

  Discriminator& at(AlignmentLevel level);
  std::vector<ad::Parameter*> parameters();
};

}  // namespace blenda
