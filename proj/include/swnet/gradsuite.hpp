#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swnet/nn.hpp"

namespace swnet {

struct GradSuiteConfig {
  std::size_t probes = 100;           // random points per case
  std::size_t coords_per_probe = 24;  // coordinates checked per point (all if fewer)
  double pure_tol = 1e-6;
  double pipeline_tol = 1e-4;
  std::uint64_t seed = 11;
};

struct GradCaseResult {
  std::string name;
  bool pipeline = false;
  double tol = 0.0;
  std::size_t probes = 0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double max_rel_err = 0.0;
  bool passed = true;
};

/// Finite-difference checks of every hand-written gradient: the loss
/// primitives, MLP backprop, the SWN objective and the detector objective.
std::vector<GradCaseResult> run_gradcheck_suite(const GradSuiteConfig& cfg = {});

}  // namespace swnet
