#include "blenda/model.hpp"

#include <cmath>
#include <string>

#include "blenda/error.hpp"
#include "blenda/rng.hpp"

namespace blenda {

void ModelConfig::validate() const {
  if (image_size <= 0 || grid_size <= 0 || image_size % grid_size != 0) {
    throw InvalidArgument("model image_size must be a positive multiple of grid_size");
  }
  if (num_classes < 2 || embed_dim < 1 || feature_dim < 1 || discriminator_hidden < 1) {
    throw InvalidArgument("model dimensions must be positive and num_classes >= 2");
  }
}

ad::Matrix extract_patches(const ImageBuffer& image, int grid_size) {
  if (image.height() != image.width() || image.height() % static_cast<std::size_t>(grid_size) != 0) {
    throw ShapeError("image " + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()) + " does not tile a " +
                     std::to_string(grid_size) + "x" + std::to_string(grid_size) + " grid");
  }
  const auto g = static_cast<std::size_t>(grid_size);
  const std::size_t cell = image.height() / g;
  ad::Matrix patches(g * g, cell * cell * 3);
  for (std::size_t gr = 0; gr < g; ++gr) {
    for (std::size_t gc = 0; gc < g; ++gc) {
      double* row = &patches(gr * g + gc, 0);
      for (std::size_t r = 0; r < cell; ++r) {
        for (std::size_t c = 0; c < cell; ++c) {
          for (std::size_t ch = 0; ch < 3; ++ch) {
            *row++ = image.at(gr * cell + r, gc * cell + c, ch);
          }
        }
      }
    }
  }
  return patches;
}

namespace {

ad::Parameter he_init(std::string name, std::size_t fan_in, std::size_t fan_out,
                      std::uint64_t seed) {
  ad::Matrix w(fan_in, fan_out);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w.values[i] = std_dev * counter_normal(seed, i);
  }
  return ad::Parameter(std::move(name), std::move(w));
}

ad::Parameter zeros(std::string name, std::size_t rows, std::size_t cols) {
  return ad::Parameter(std::move(name), ad::Matrix(rows, cols));
}

}  // namespace

DetectorModel::DetectorModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto patch = static_cast<std::size_t>(config_.patch_dim());
  const auto embed = static_cast<std::size_t>(config_.embed_dim);
  const auto feat = static_cast<std::size_t>(config_.feature_dim);
  const auto out = static_cast<std::size_t>(config_.num_classes + 1);
  embed_w_ = he_init("detector.embed.w", patch, embed, derive_seed(seed, 1));
  embed_b_ = zeros("detector.embed.b", 1, embed);
  backbone_w_ = he_init("detector.backbone.w", embed, feat, derive_seed(seed, 2));
  backbone_b_ = zeros("detector.backbone.b", 1, feat);
  head_w_ = he_init("detector.head.w", feat, out, derive_seed(seed, 3));
  head_b_ = zeros("detector.head.b", 1, out);
}

DetectorModel::Output DetectorModel::forward(ad::Tape& tape, const ImageBuffer& image) {
  if (image.height() != static_cast<std::size_t>(config_.image_size)) {
    throw ShapeError("detector expects " + std::to_string(config_.image_size) + " pixel images");
  }
  const ad::Var x = tape.constant(extract_patches(image, config_.grid_size));
  const ad::Var h = ad::relu(ad::add(ad::matmul(x, tape.parameter(embed_w_)), tape.parameter(embed_b_)));
  const ad::Var f =
      ad::relu(ad::add(ad::matmul(h, tape.parameter(backbone_w_)), tape.parameter(backbone_b_)));
  const ad::Var logits = ad::add(ad::matmul(f, tape.parameter(head_w_)), tape.parameter(head_b_));
  return {f, logits};
}

std::vector<ad::Parameter*> DetectorModel::backbone_parameters() {
  return {&embed_w_, &embed_b_, &backbone_w_, &backbone_b_};
}

std::vector<ad::Parameter*> DetectorModel::head_parameters() { return {&head_w_, &head_b_}; }

std::vector<ad::Parameter*> DetectorModel::parameters() {
  return {&embed_w_, &embed_b_, &backbone_w_, &backbone_b_, &head_w_, &head_b_};
}

std::string_view to_string(AlignmentLevel level) {
  switch (level) {
    case AlignmentLevel::space: return "sp";
    case AlignmentLevel::channel: return "ch";
    case AlignmentLevel::instance: return "ins";
  }
  return "?";
}

ad::Var QueryFeatures::at(AlignmentLevel level) const {
  switch (level) {
    case AlignmentLevel::space: return space;
    case AlignmentLevel::channel: return channel;
    case AlignmentLevel::instance: return instance;
  }
  throw InvalidArgument("unknown alignment level");
}

QueryFeatures extract_queries(const DetectorModel::Output& output, int num_classes) {
  ad::Tape& tape = *output.features.tape();
  const ad::Var features = output.features;
  // Foreground probability per cell: total softmax mass on object classes.
  ad::Matrix selector(static_cast<std::size_t>(num_classes + 1), 1, 1.0);
  selector.values.back() = 0.0;
  const ad::Var probs = ad::exp(ad::log_softmax(output.logits));
  const ad::Var foreground = ad::matmul(probs, tape.constant(std::move(selector)));
  return {ad::col_mean(features), ad::transpose(ad::row_mean(features)),
          ad::col_mean(ad::mul(features, foreground))};
}

Discriminator::Discriminator(std::string_view tag, int input_dim, int hidden, std::uint64_t seed) {
  const std::string prefix = "disc." + std::string(tag) + ".";
  w1_ = he_init(prefix + "w1", static_cast<std::size_t>(input_dim), static_cast<std::size_t>(hidden),
                derive_seed(seed, 1));
  b1_ = zeros(prefix + "b1", 1, static_cast<std::size_t>(hidden));
  w2_ = he_init(prefix + "w2", static_cast<std::size_t>(hidden), 1, derive_seed(seed, 2));
  b2_ = zeros(prefix + "b2", 1, 1);
}

ad::Var Discriminator::forward(ad::Tape& tape, ad::Var query) {
  const ad::Var h = ad::relu(ad::add(ad::matmul(query, tape.parameter(w1_)), tape.parameter(b1_)));
  return ad::sigmoid(ad::add(ad::matmul(h, tape.parameter(w2_)), tape.parameter(b2_)));
}

std::vector<ad::Parameter*> Discriminator::parameters() { return {&w1_, &b1_, &w2_, &b2_}; }

DiscriminatorBank::DiscriminatorBank(const ModelConfig& config, std::uint64_t seed)
    : space("sp", config.feature_dim, config.discriminator_hidden, derive_seed(seed, 11)),
      channel("ch", config.cells(), config.discriminator_hidden, derive_seed(seed, 12)),
      instance("ins", config.feature_dim, config.discriminator_hidden, derive_seed(seed, 13)) {}

Discriminator& DiscriminatorBank::at(AlignmentLevel level) {
  switch (level) {
    case AlignmentLevel::space: return space;
    case AlignmentLevel::channel: return channel;
    case AlignmentLevel::instance: return instance;
  }
  throw InvalidArgument("unknown alignment level");
}

std::vector<ad::Parameter*> DiscriminatorBank::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto level : kAlignmentLevels) {
    for (auto* p : at(level).parameters()) out.push_back(p);
  }
  return out;
}

}  // namespace blenda
