#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "swnet/losses.hpp"
#include "swnet/nn.hpp"

namespace swnet {

struct SwnConfig {
  std::size_t embed_dim = 16;
  std::vector<std::size_t> hidden{64};
  double clip_bound = 2.0;
  bool smoothing = true;
  double init_std = 1e-4;
  double init_mean = 0.0;
  /// Initial bias of the last layer of both weight heads.
  double last_bias_init = 0.0;

  void validate() const;
};

/// Sample weighting network: four scalar embeddings (F, G, H, K) feeding two
/// heads that predict log-sigma for classification and regression.
struct SwnParams {
  MlpParams f;  // classification loss
  MlpParams g;  // regression loss
  MlpParams h;  // IoU
  MlpParams k;  // probability
  MlpParams head_cls;
  MlpParams head_reg;

  std::array<MlpParams*, 6> nets() { return {&f, &g, &h, &k, &head_cls, &head_reg}; }
  std::array<const MlpParams*, 6> nets() const { return {&f, &g, &h, &k, &head_cls, &head_reg}; }
  std::size_t embed_dim() const { return f.out_dim(); }
};

inline constexpr std::array<const char*, 6> kSwnSectionNames{"F", "G", "H", "K", "W_cls", "W_reg"};

struct SwnGrads {
  std::array<MlpGrads, 6> nets;

  static SwnGrads zeros_like(const SwnParams& p);
  std::array<const MlpGrads*, 6> ptrs() const;
};

SwnParams init_swn(const SwnConfig& cfg, std::uint64_t seed);

std::vector<double> flatten(const SwnParams& p);
void unflatten(std::span<const double> flat, SwnParams& p);
std::vector<double> flatten(const SwnGrads& g);

/// Loss inputs are passed through log(1 + x) before F and G.
std::array<double, 4> normalize_inputs(double l_cls, double l_reg, double iou, double prob);

/// d = concat(F(L_cls), G(L_reg), H(IoU), K(Prob)). Negatives must pass
/// iou = prob = 0.
std::vector<double> embed_features(const SwnParams& p, double l_cls, double l_reg, double iou,
                                   double prob);

struct SwnPrediction {
  double m_cls = 0.0;
  double m_reg = 0.0;
  double raw_cls = 0.0;
  double raw_reg = 0.0;
};

/// Head outputs clamped to [-clip_bound, clip_bound].
SwnPrediction predict_weights(const SwnParams& p, std::span<const double> d, double clip_bound);

/// Replaces every positive's s_cls by the positive mean and every
/// negative's by the negative mean. Empty groups are left alone.
void smooth_cls_weights(std::span<SampleRecord> batch);

/// Batch objective: the per-sample uncertainty loss with classification
/// terms averaged by N1 = |batch| and regression terms by N2 = |positives|.
/// Loss inputs are treated as constants.
struct SwnEvaluation {
  double loss = 0.0;
  std::vector<double> m_cls;
  std::vector<double> m_reg;
  std::vector<double> raw_w_cls;  // exp(-2 m_cls) before smoothing
  std::vector<double> s_cls;      // effective classification weight
  std::vector<double> s_reg;      // exp(-2 m_reg) on positives, else 0
  std::vector<double> d_lcls;     // dJ/dL_cls per sample (= s_cls / N1)
  std::vector<double> d_lreg;     // dJ/dL_reg per sample (= s_reg / N2)
  LossNormalization norm;
  std::uint64_t pattern = 0;      // relu and clamp branch signature
  SwnGrads grads;
};

SwnEvaluation swn_evaluate(const SwnParams& p, std::span<const SampleRecord> batch,
                           const RegularizerConfig& reg, const SwnConfig& cfg,
                           bool with_grads = true);

struct SwnStepResult {
  double loss = 0.0;
  std::vector<double> m_cls;
  std::vector<double> m_reg;
  std::vector<double> raw_w_cls;
  std::vector<double> s_cls;
  std::vector<double> s_reg;
  std::vector<double> d_lcls;
  std::vector<double> d_lreg;
  LossNormalization norm;
};

/// Evaluates the batch with the current parameters, then applies one
/// optimizer step to the SWN only.
SwnStepResult swn_step(SwnParams& p, std::span<const SampleRecord> batch,
                       const RegularizerConfig& reg, const SwnConfig& cfg, OptimizerState& opt);

std::vector<NamedMlp> swn_sections(const SwnParams& p);
SwnParams swn_from_sections(std::span<const NamedMlp> sections);

}  // namespace swnet
