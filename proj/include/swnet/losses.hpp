#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "swnet/geometry.hpp"
#include "swnet/matching.hpp"

namespace swnet {

/// One training sample's state. Negatives carry iou = prob = 0 and no
/// regression loss. m_cls and m_reg are log-sigma predictions.
struct SampleRecord {
  std::size_t index = 0;
  SampleLabel label = SampleLabel::negative;
  double l_cls = 0.0;
  double l_reg = 0.0;
  double iou = 0.0;
  double prob = 0.0;
  double m_cls = 0.0;
  double m_reg = 0.0;
  double s_cls = 1.0;
  double s_reg = 0.0;

  bool positive() const { return label == SampleLabel::positive; }
};

/// N1: number of training samples; N2: number of foreground samples.
struct LossNormalization {
  double n1 = 0.0;
  double n2 = 0.0;
};

struct RegularizerConfig {
  double lambda1 = 0.5;
  double lambda2 = 0.5;

  void validate() const;
};

/// -log softmax(logits)[label], shifted by the max logit.
double softmax_ce(std::span<const double> logits, int label);
/// d softmax_ce / d logits = softmax(logits) - onehot(label).
std::vector<double> softmax_ce_grad(std::span<const double> logits, int label);

double l2_regression(const Offset4& pred, const Offset4& target);
/// Gradient of l2_regression with respect to pred.
Offset4 l2_regression_grad(const Offset4& pred, const Offset4& target);

/// (1/N1) sum s_cls*L_cls + (1/N2) sum s_reg*L_reg; a term is 0 when its N is 0.
double unified_loss(std::span<const SampleRecord> records, const WeightAssignment& w,
                    const LossNormalization& norm);

/// exp(-2 m_cls) L_cls + l1 m_cls + [positive] (exp(-2 m_reg) L_reg + l2 m_reg).
double uncertainty_loss(const SampleRecord& rec, const RegularizerConfig& reg);

struct UncertaintyGrad {
  double d_lcls = 0.0;
  double d_lreg = 0.0;
  double d_mcls = 0.0;
  double d_mreg = 0.0;
};

UncertaintyGrad uncertainty_loss_grad(const SampleRecord& rec, const RegularizerConfig& reg);

/// Regression half of the uncertainty loss in the sigma parameterization:
/// L/sigma^2 + lambda2 * log(sigma).
double regression_uncertainty_loss(double l_reg, double sigma, double lambda2);

struct OptimalSigma {
  double sigma2 = 0.0;
  double reduced_loss = 0.0;
};

/// Closed-form minimizer of regression_uncertainty_loss over sigma:
/// sigma^2 = 2 L / lambda2, reduced value (lambda2/2)(1 + log(2 L / lambda2)).
/// With lambda2 = 2 (a log sigma^2 regularizer) this is sigma^2 = L.
OptimalSigma optimal_sigma(double l_reg, double lambda2 = 1.0);

/// softmax(logits / t).
std::vector<double> tempered_softmax(std::span<const double> logits, double t);

/// |(1/sigma) sum exp(p_c / sigma^2) - (sum exp(p_c))^(1/sigma^2)|: the gap
/// of the approximation that turns the tempered softmax likelihood into the
/// weighted cross-entropy plus log-sigma form. Zero at sigma = 1.
double temperature_approx_error(std::span<const double> logits, double sigma);

/// exp(-2 m_reg) ||pred - target||^2 + lambda2 * m_reg.
double kl_baseline_loss(const Offset4& pred, const Offset4& target, double m_reg, double lambda2);

}  // namespace swnet
