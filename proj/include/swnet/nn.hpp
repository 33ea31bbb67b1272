#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swnet/rng.hpp"

namespace swnet {

enum class Activation : std::uint8_t { identity, relu };

/// Fully connected layer, weight stored row-major as (out x in).
struct DenseParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
  Activation act = Activation::identity;

  double& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }
};

struct MlpParams {
  std::vector<DenseParams> layers;
  /// Changes whenever the parameters are mutated through this API, so tapes
  /// recorded against older values can be rejected.
  std::uint64_t version = 0;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t param_count() const;
  void touch();
};

struct DenseGrads {
  std::vector<double> weight;
  std::vector<double> bias;
};

struct MlpGrads {
  std::vector<DenseGrads> layers;

  static MlpGrads zeros_like(const MlpParams& p);
  void set_zero();
  MlpGrads& operator+=(const MlpGrads& other);
};

/// Cached activations of one forward pass.
struct MlpTape {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  std::uint64_t version = 0;

  /// Hash of the relu on/off pattern; changes when a probe crosses a kink.
  std::uint64_t activation_pattern(const MlpParams& p) const;
};

struct MlpForward {
  std::vector<double> y;
  MlpTape tape;
};

struct MlpBackward {
  std::vector<double> dx;
  MlpGrads grads;
};

MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation head);

MlpForward mlp_forward(const MlpParams& p, std::span<const double> x);
/// Forward pass without recording a tape.
std::vector<double> mlp_predict(const MlpParams& p, std::span<const double> x);

/// Reverse pass; parameter gradients are added into `acc`.
std::vector<double> mlp_backward(const MlpParams& p, const MlpTape& tape,
                                 std::span<const double> dy, MlpGrads& acc);
MlpBackward mlp_backward(const MlpParams& p, const MlpTape& tape, std::span<const double> dy);

DenseParams init_gaussian(std::size_t in, std::size_t out, double mean, double std, Rng& rng,
                          Activation act = Activation::identity);
DenseParams init_gaussian(std::size_t in, std::size_t out, double mean, double std,
                          std::uint64_t seed, Activation act = Activation::identity);
void init_gaussian(MlpParams& p, double mean, double std, Rng& rng);

// Flat views in layer order: weight then bias.
std::vector<double> flatten(const MlpParams& p);
std::vector<double> flatten(const MlpGrads& g);
void unflatten(std::span<const double> flat, MlpParams& p);

enum class OptimizerKind : std::uint8_t { sgd, adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.01;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::vector<double> m;  // momentum / first moment
  std::vector<double> v;  // second moment
  std::uint64_t step = 0;

  static OptimizerState sgd(double lr, double momentum = 0.0, double weight_decay = 0.0);
  static OptimizerState adam(double lr, double weight_decay = 0.0);
};

void sgd_step(OptimizerState& state, std::span<MlpParams* const> params,
              std::span<const MlpGrads* const> grads);
void adam_step(OptimizerState& state, std::span<MlpParams* const> params,
               std::span<const MlpGrads* const> grads);
void optimizer_step(OptimizerState& state, std::span<MlpParams* const> params,
                    std::span<const MlpGrads* const> grads);

struct Probe {
  double value = 0.0;
  std::uint64_t pattern = 0;  // non-differentiable branch signature
};

struct GradcheckOptions {
  double h = 1e-5;
  double tol = 1e-6;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-4;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // coordinates whose probe crossed a kink
  bool passed = true;
};

/// Central-difference check of `analytic` against f at x. A coordinate is
/// excluded, not failed, when x +/- h lands on a different branch pattern.
GradcheckReport gradcheck(const std::function<Probe(std::span<const double>)>& f,
                          std::span<const double> x, std::span<const double> analytic,
                          const GradcheckOptions& opts = {});

/// Text checkpoint: versioned header, named sections, row-major values with
/// 9 significant digits.
using NamedMlp = std::pair<std::string, MlpParams>;
void write_checkpoint(std::ostream& os, std::span<const NamedMlp> sections);
std::vector<NamedMlp> read_checkpoint(std::istream& is);

}  // namespace swnet
