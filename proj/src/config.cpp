#include "blenda/config.hpp"

#include <fstream>
#include <set>

#include "blenda/error.hpp"

namespace blenda {

using nlohmann::json;

void AblationSettings::validate() const {
  if (seeds < 1) {
    throw InvalidArgument("ablation.seeds must be >= 1");
  }
  for (double d : static_deltas) {
    if (!(d >= 0.0 && d <= 1.0)) {
      throw InvalidArgument("ablation.static_deltas entries must lie in [0, 1]");
    }
  }
}

void RunConfig::synchronize() {
  benchmark.seed = seed;
  adaptation.seed = seed;
  adaptation.model.image_size = benchmark.image_size;
  adaptation.model.grid_size = benchmark.grid_size;
  adaptation.model.num_classes = benchmark.num_classes;
}

void RunConfig::validate() const {
  benchmark.validate();
  adaptation.validate();
  ablation.validate();
  if (schedule_samples < 2) {
    throw InvalidArgument("schedule.samples must be >= 2");
  }
  if (!(blend_delta >= 0.0 && blend_delta <= 1.0)) {
    throw InvalidArgument("blend.delta must lie in [0, 1]");
  }
}

namespace {

// Reads known keys from one JSON object and rejects everything else.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw InvalidArgument("config " + display() + " must be an object");
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config key " + child(key) + " has the wrong type");
    }
  }

  void read_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_number()) {
      throw InvalidArgument("config key " + child(key) + " must be a number or null");
    }
    out = it->get<double>();
  }

  template <typename F>
  void nested(const char* key, F&& parse) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    Section sub(*it, child(key));
    parse(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw InvalidArgument("unknown config key " + child(it.key()));
      }
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_fog(Section& s, FogParams& fog) {
  s.read("fog_strength", fog.fog_strength);
  s.read("veil_luminance", fog.veil_luminance);
  s.read("noise_sigma", fog.noise_sigma);
  s.read("seed", fog.seed);
  s.read("patch_count", fog.patch_count);
  s.read("patch_radius", fog.patch_radius);
}

void read_optimizer(Section& s, ad::AdamWConfig& opt) {
  s.read("learning_rate", opt.learning_rate);
  s.read("weight_decay", opt.weight_decay);
  s.read("beta1", opt.beta1);
  s.read("beta2", opt.beta2);
  s.read("eps", opt.eps);
}

json fog_json(const FogParams& f) {
  return {{"fog_strength", f.fog_strength},
          {"veil_luminance", f.veil_luminance},
          {"noise_sigma", f.noise_sigma},
          {"seed", f.seed},
          {"patch_count", f.patch_count},
          {"patch_radius", f.patch_radius}};
}

json optimizer_json(const ad::AdamWConfig& o) {
  return {{"learning_rate", o.learning_rate},
          {"weight_decay", o.weight_decay},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps}};
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "");
  root.read("seed", cfg.seed);
  root.read("dataset_root", cfg.dataset_root);
  root.read("output_dir", cfg.output_dir);
  root.read("checkpoint", cfg.checkpoint);
  root.nested("schedule", [&](Section& s) {
    s.read("alpha", cfg.adaptation.schedule_alpha);
    s.read("beta", cfg.adaptation.schedule_beta);
    s.read("samples", cfg.schedule_samples);
  });
  root.nested("benchmark", [&](Section& s) {
    auto& b = cfg.benchmark;
    s.read("image_size", b.image_size);
    s.read("grid_size", b.grid_size);
    s.read("num_classes", b.num_classes);
    s.read("source_count", b.source_count);
    s.read("target_count", b.target_count);
    s.read("min_objects", b.min_objects);
    s.read("max_objects", b.max_objects);
    s.nested("translator_fog", [&](Section& f) { read_fog(f, b.translator_fog); });
    s.nested("target_fog", [&](Section& f) { read_fog(f, b.target_fog); });
    s.read("target_fog_jitter", b.target_fog_jitter);
  });
  root.nested("model", [&](Section& s) {
    s.read("embed_dim", cfg.adaptation.model.embed_dim);
    s.read("feature_dim", cfg.adaptation.model.feature_dim);
    s.read("discriminator_hidden", cfg.adaptation.model.discriminator_hidden);
  });
  root.nested("loss_weights", [&](Section& s) {
    s.read("sp", cfg.adaptation.loss_weights.space);
    s.read("ch", cfg.adaptation.loss_weights.channel);
    s.read("ins", cfg.adaptation.loss_weights.instance);
  });
  root.nested("pretrain", [&](Section& s) {
    s.read("epochs", cfg.adaptation.pretrain_epochs);
    s.read("adversarial", cfg.adaptation.pretrain_adversarial);
    s.nested("optimizer", [&](Section& o) { read_optimizer(o, cfg.adaptation.pretrain_optimizer); });
  });
  root.nested("finetune", [&](Section& s) {
    s.read("iterations", cfg.adaptation.finetune_iterations);
    s.read_optional("static_delta", cfg.adaptation.static_delta);
    std::optional<double> stop_at;
    s.read_optional("stop_at", stop_at);
    if (stop_at) {
      if (*stop_at < 0 || *stop_at != static_cast<double>(static_cast<std::int64_t>(*stop_at))) {
        throw InvalidArgument("config key finetune.stop_at must be a non-negative integer");
      }
      cfg.stop_at = static_cast<std::int64_t>(*stop_at);
    }
    std::string mode(to_string(cfg.adaptation.adversarial_mode));
    s.read("adversarial_mode", mode);
    cfg.adaptation.adversarial_mode = parse_adversarial_mode(mode);
    s.nested("optimizer", [&](Section& o) { read_optimizer(o, cfg.adaptation.finetune_optimizer); });
  });
  root.nested("blend", [&](Section& s) { s.read("delta", cfg.blend_delta); });
  root.nested("ablation", [&](Section& s) {
    s.read("seeds", cfg.ablation.seeds);
    s.read("static_deltas", cfg.ablation.static_deltas);
  });
  root.finish();
  cfg.synchronize();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  const auto& a = cfg.adaptation;
  const auto& b = cfg.benchmark;
  return {
      {"seed", cfg.seed},
      {"dataset_root", cfg.dataset_root},
      {"output_dir", cfg.output_dir},
      {"checkpoint", cfg.checkpoint},
      {"schedule", {{"alpha", a.schedule_alpha}, {"beta", a.schedule_beta}, {"samples", cfg.schedule_samples}}},
      {"benchmark",
       {{"image_size", b.image_size},
        {"grid_size", b.grid_size},
        {"num_classes", b.num_classes},
        {"source_count", b.source_count},
        {"target_count", b.target_count},
        {"min_objects", b.min_objects},
        {"max_objects", b.max_objects},
        {"translator_fog", fog_json(b.translator_fog)},
        {"target_fog", fog_json(b.target_fog)},
        {"target_fog_jitter", b.target_fog_jitter}}},
      {"model",
       {{"embed_dim", a.model.embed_dim},
        {"feature_dim", a.model.feature_dim},
        {"discriminator_hidden", a.model.discriminator_hidden}}},
      {"loss_weights", {{"sp", a.loss_weights.space}, {"ch", a.loss_weights.channel}, {"ins", a.loss_weights.instance}}},
      {"pretrain",
       {{"epochs", a.pretrain_epochs},
        {"adversarial", a.pretrain_adversarial},
        {"optimizer", optimizer_json(a.pretrain_optimizer)}}},
      {"finetune",
       {{"iterations", a.finetune_iterations},
        {"static_delta", a.static_delta ? json(*a.static_delta) : json(nullptr)},
        {"stop_at", cfg.stop_at ? json(*cfg.stop_at) : json(nullptr)},
        {"adversarial_mode", std::string(to_string(a.adversarial_mode))},
        {"optimizer", optimizer_json(a.finetune_optimizer)}}},
      {"blend", {{"delta", cfg.blend_delta}}},
      {"ablation", {{"seeds", cfg.ablation.seeds}, {"static_deltas", cfg.ablation.static_deltas}}},
  };
}

}  // namespace blenda
