#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swnet/gradsuite.hpp"
#include "swnet/toydet.hpp"

namespace swnet {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
  std::size_t smoothing_width = 50;
  double bin_width = 0.1;
  std::vector<Strategy> compare_strategies{Strategy::random, Strategy::ohem, Strategy::focal,
                                           Strategy::kl, Strategy::rpn, Strategy::swn};
  std::vector<double> sweep_lambdas{0.1, 0.3, 0.5, 0.7, 1.0};
  std::vector<double> sensitivity_biases{-1.0, -0.5, 0.0, 0.5, 1.0};
  int sensitivity_k = 500;
  std::size_t jobs = 1;
  bool charts = true;
};

struct RunConfig {
  TrainConfig train;
  AnalysisConfig analysis;
  GradSuiteConfig gradcheck;
};

/// Defaults as a JSON tree; the schema is exactly this tree's key set.
nlohmann::json default_config_json();

/// Merges `user` onto the defaults. Unknown keys and type mismatches throw
/// ConfigError naming the dotted key.
nlohmann::json merge_config(const nlohmann::json& user);

/// Applies "dotted.key=value". The value is parsed as JSON when possible,
/// otherwise taken as a string. The key must already exist.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

/// Converts a merged tree into typed configs and validates them.
RunConfig parse_config(const nlohmann::json& merged);

/// Loads a config file or a run manifest (its "config" member).
nlohmann::json load_config_file(const std::string& path);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& merged);

}  // namespace swnet
