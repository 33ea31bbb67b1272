#include "swnet/config.hpp"

#include <cstdio>
#include <fstream>

namespace swnet {

using nlohmann::json;

namespace {

json strategies_json(const std::vector<Strategy>& v) {
  json a = json::array();
  for (Strategy s : v) a.push_back(std::string(strategy_name(s)));
  return a;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers may not be given as floats; floats accept integers.
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

void merge_into(json& dst, const json& src, const std::string& prefix) {
  if (!src.is_object()) throw ConfigError("config: '" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else {
      if (!same_kind(slot, it.value())) throw ConfigError("config: wrong type for '" + key + "'");
      if (slot.is_number_unsigned() && it.value().is_number_integer() && it.value().get<std::int64_t>() < 0) {
        throw ConfigError("config: '" + key + "' must be >= 0");
      }
      slot = it.value();
    }
  }
}

template <class T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + section + "." + key + "'");
  }
}

}  // namespace

json default_config_json() {
  const TrainConfig t = standard_noisy_benchmark();
  const AnalysisConfig a;
  const GradSuiteConfig g;
  json j;
  j["config_version"] = kConfigVersion;
  j["seed"] = t.seed;
  j["scene"] = {
      {"canvas", t.scene.canvas},
      {"grid", t.scene.grid},
      {"anchor_scales", t.scene.anchor_scales},
      {"anchor_ratios", t.scene.anchor_ratios},
      {"min_objects", t.scene.min_objects},
      {"max_objects", t.scene.max_objects},
      {"num_classes", t.scene.num_classes},
      {"min_size", t.scene.min_size},
      {"max_size", t.scene.max_size},
      {"feature_dim", t.scene.feature_dim},
      {"signal", t.scene.signal},
      {"box_jitter", t.scene.box_jitter},
      {"label_flip", t.scene.label_flip},
      {"feature_noise", t.scene.feature_noise},
      {"seed", t.scene.seed},
  };
  j["train"] = {
      {"strategy", std::string(strategy_name(t.strategy))},
      {"epochs", t.epochs},
      {"iters_per_epoch", t.iters_per_epoch},
      {"batch_scenes", t.batch_scenes},
      {"det_hidden", t.det_hidden},
      {"det_lr", t.det_lr},
      {"det_momentum", t.det_momentum},
      {"weight_decay", t.weight_decay},
      {"swn_lr", t.swn_lr},
      {"lr_decay_at", t.lr_decay_at},
      {"lr_decay", t.lr_decay},
      {"eval_scenes", t.eval_scenes},
      {"max_iterations", t.max_iterations},
  };
  j["sampling"] = {
      {"n_p", t.sampling.n_p},
      {"n_n", t.sampling.n_n},
      {"gamma", t.sampling.gamma},
      {"rho", t.sampling.rho},
      {"pos_thr", t.sampling.pos_thr},
      {"neg_thr", t.sampling.neg_thr},
      {"nms_thr", t.sampling.nms_thr},
  };
  j["regularizer"] = {{"lambda1", t.reg.lambda1}, {"lambda2", t.reg.lambda2}};
  j["swn"] = {
      {"embed_dim", t.swn.embed_dim},
      {"hidden", t.swn.hidden},
      {"clip_bound", t.swn.clip_bound},
      {"smoothing", t.swn.smoothing},
      {"init_std", t.swn.init_std},
      {"init_mean", t.swn.init_mean},
      {"last_bias_init", t.swn.last_bias_init},
  };
  j["analysis"] = {
      {"smoothing_width", a.smoothing_width},
      {"bin_width", a.bin_width},
      {"compare_strategies", strategies_json(a.compare_strategies)},
      {"sweep_lambdas", a.sweep_lambdas},
      {"sensitivity_biases", a.sensitivity_biases},
      {"sensitivity_k", a.sensitivity_k},
      {"jobs", a.jobs},
      {"charts", a.charts},
  };
  j["gradcheck"] = {
      {"probes", g.probes},
      {"coords_per_probe", g.coords_per_probe},
      {"pure_tol", g.pure_tol},
      {"pipeline_tol", g.pipeline_tol},
      {"seed", g.seed},
  };
  return j;
}

json merge_config(const json& user) {
  json merged = default_config_json();
  merge_into(merged, user, "");
  if (merged["config_version"].get<int>() != kConfigVersion) {
    throw ConfigError("config: unsupported config_version " + merged["config_version"].dump());
  }
  return merged;
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config: override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  // Build {"a": {"b": value}} and merge it, so overrides get the same checks.
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos;) {
    parts.push_back(rest.substr(0, pos));
    rest = rest.substr(pos + 1);
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->empty()) throw ConfigError("config: malformed key '" + key + "'");
    patch = json{{*it, patch}};
  }
  merge_into(cfg, patch, "");
}

RunConfig parse_config(const json& m) {
  RunConfig rc;
  TrainConfig& t = rc.train;
  try {
    t.seed = m.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for 'seed'");
  }

  t.scene.canvas = get<double>(m, "scene", "canvas");
  t.scene.grid = get<int>(m, "scene", "grid");
  t.scene.anchor_scales = get<std::vector<double>>(m, "scene", "anchor_scales");
  t.scene.anchor_ratios = get<std::vector<double>>(m, "scene", "anchor_ratios");
  t.scene.min_objects = get<int>(m, "scene", "min_objects");
  t.scene.max_objects = get<int>(m, "scene", "max_objects");
  t.scene.num_classes = get<int>(m, "scene", "num_classes");
  t.scene.min_size = get<double>(m, "scene", "min_size");
  t.scene.max_size = get<double>(m, "scene", "max_size");
  t.scene.feature_dim = get<int>(m, "scene", "feature_dim");
  t.scene.signal = get<double>(m, "scene", "signal");
  t.scene.box_jitter = get<double>(m, "scene", "box_jitter");
  t.scene.label_flip = get<double>(m, "scene", "label_flip");
  t.scene.feature_noise = get<double>(m, "scene", "feature_noise");
  t.scene.seed = get<std::uint64_t>(m, "scene", "seed");

  try {
    t.strategy = parse_strategy(get<std::string>(m, "train", "strategy"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: train.strategy: ") + e.what());
  }
  t.epochs = get<int>(m, "train", "epochs");
  t.iters_per_epoch = get<int>(m, "train", "iters_per_epoch");
  t.batch_scenes = get<int>(m, "train", "batch_scenes");
  t.det_hidden = get<std::size_t>(m, "train", "det_hidden");
  t.det_lr = get<double>(m, "train", "det_lr");
  t.det_momentum = get<double>(m, "train", "det_momentum");
  t.weight_decay = get<double>(m, "train", "weight_decay");
  t.swn_lr = get<double>(m, "train", "swn_lr");
  t.lr_decay_at = get<std::vector<double>>(m, "train", "lr_decay_at");
  t.lr_decay = get<double>(m, "train", "lr_decay");
  t.eval_scenes = get<int>(m, "train", "eval_scenes");
  t.max_iterations = get<int>(m, "train", "max_iterations");

  t.sampling.n_p = get<int>(m, "sampling", "n_p");
  t.sampling.n_n = get<int>(m, "sampling", "n_n");
  t.sampling.gamma = get<double>(m, "sampling", "gamma");
  t.sampling.rho = get<double>(m, "sampling", "rho");
  t.sampling.pos_thr = get<double>(m, "sampling", "pos_thr");
  t.sampling.neg_thr = get<double>(m, "sampling", "neg_thr");
  t.sampling.nms_thr = get<double>(m, "sampling", "nms_thr");
  t.sampling.seed = t.seed;

  t.reg.lambda1 = get<double>(m, "regularizer", "lambda1");
  t.reg.lambda2 = get<double>(m, "regularizer", "lambda2");

  t.swn.embed_dim = get<std::size_t>(m, "swn", "embed_dim");
  t.swn.hidden = get<std::vector<std::size_t>>(m, "swn", "hidden");
  t.swn.clip_bound = get<double>(m, "swn", "clip_bound");
  t.swn.smoothing = get<bool>(m, "swn", "smoothing");
  t.swn.init_std = get<double>(m, "swn", "init_std");
  t.swn.init_mean = get<double>(m, "swn", "init_mean");
  t.swn.last_bias_init = get<double>(m, "swn", "last_bias_init");

  AnalysisConfig& a = rc.analysis;
  a.smoothing_width = get<std::size_t>(m, "analysis", "smoothing_width");
  a.bin_width = get<double>(m, "analysis", "bin_width");
  a.compare_strategies.clear();
  for (const auto& s : get<std::vector<std::string>>(m, "analysis", "compare_strategies")) {
    try {
      a.compare_strategies.push_back(parse_strategy(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: analysis.compare_strategies: ") + e.what());
    }
  }
  a.sweep_lambdas = get<std::vector<double>>(m, "analysis", "sweep_lambdas");
  a.sensitivity_biases = get<std::vector<double>>(m, "analysis", "sensitivity_biases");
  a.sensitivity_k = get<int>(m, "analysis", "sensitivity_k");
  a.jobs = get<std::size_t>(m, "analysis", "jobs");
  a.charts = get<bool>(m, "analysis", "charts");

  GradSuiteConfig& g = rc.gradcheck;
  g.probes = get<std::size_t>(m, "gradcheck", "probes");
  g.coords_per_probe = get<std::size_t>(m, "gradcheck", "coords_per_probe");
  g.pure_tol = get<double>(m, "gradcheck", "pure_tol");
  g.pipeline_tol = get<double>(m, "gradcheck", "pipeline_tol");
  g.seed = get<std::uint64_t>(m, "gradcheck", "seed");

  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (a.smoothing_width == 0) throw ConfigError("config: analysis.smoothing_width must be >= 1");
  if (!(a.bin_width > 0.0 && a.bin_width <= 0.5)) throw ConfigError("config: analysis.bin_width must lie in (0, 0.5]");
  if (a.sensitivity_k <= 0) throw ConfigError("config: analysis.sensitivity_k must be >= 1");
  if (g.probes == 0 || g.coords_per_probe == 0) throw ConfigError("config: gradcheck probes must be >= 1");
  return rc;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: failed to parse '" + path + "': " + e.what());
  }
  if (j.is_object() && j.contains("manifest_version")) {
    if (!j.contains("config")) throw ConfigError("config: manifest '" + path + "' has no config");
    return j["config"];
  }
  return j;
}

std::string config_hash(const json& merged) {
  const std::string s = merged.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace swnet
