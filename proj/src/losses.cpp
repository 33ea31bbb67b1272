#include "swnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swnet {

namespace {

constexpr double kLossFloor = 1e-12;

double log_sum_exp(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace

void RegularizerConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw std::invalid_argument("regularizer: lambda1 and lambda2 must be >= 0");
  }
}

double softmax_ce(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("softmax_ce: label out of range");
  }
  return log_sum_exp(logits) - logits[static_cast<std::size_t>(label)];
}

std::vector<double> softmax_ce_grad(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("softmax_ce_grad: label out of range");
  }
  auto g = tempered_softmax(logits, 1.0);
  g[static_cast<std::size_t>(label)] -= 1.0;
  return g;
}

double l2_regression(const Offset4& pred, const Offset4& target) {
  const double a = pred.dx - target.dx;
  const double b = pred.dy - target.dy;
  const double c = pred.dw - target.dw;
  const double d = pred.dh - target.dh;
  return a * a + b * b + c * c + d * d;
}

Offset4 l2_regression_grad(const Offset4& pred, const Offset4& target) {
  return {2.0 * (pred.dx - target.dx), 2.0 * (pred.dy - target.dy), 2.0 * (pred.dw - target.dw),
          2.0 * (pred.dh - target.dh)};
}

double unified_loss(std::span<const SampleRecord> records, const WeightAssignment& w,
                    const LossNormalization& norm) {
  if (w.s_cls.size() != records.size() || w.s_reg.size() != records.size()) {
    throw std::invalid_argument("unified_loss: weights not aligned with records");
  }
  double cls = 0.0;
  double reg = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    cls += w.s_cls[i] * records[i].l_cls;
    reg += w.s_reg[i] * records[i].l_reg;
  }
  const double cls_term = norm.n1 > 0.0 ? cls / norm.n1 : 0.0;
  const double reg_term = norm.n2 > 0.0 ? reg / norm.n2 : 0.0;
  return cls_term + reg_term;
}

double uncertainty_loss(const SampleRecord& rec, const RegularizerConfig& reg) {
  double v = std::exp(-2.0 * rec.m_cls) * rec.l_cls + reg.lambda1 * rec.m_cls;
  if (rec.positive()) v += std::exp(-2.0 * rec.m_reg) * rec.l_reg + reg.lambda2 * rec.m_reg;
  return v;
}

UncertaintyGrad uncertainty_loss_grad(const SampleRecord& rec, const RegularizerConfig& reg) {
  UncertaintyGrad g;
  const double wc = std::exp(-2.0 * rec.m_cls);
  g.d_lcls = wc;
  g.d_mcls = -2.0 * wc * rec.l_cls + reg.lambda1;
  if (rec.positive()) {
    const double wr = std::exp(-2.0 * rec.m_reg);
    g.d_lreg = wr;
    g.d_mreg = -2.0 * wr * rec.l_reg + reg.lambda2;
  }
  return g;
}

double regression_uncertainty_loss(double l_reg, double sigma, double lambda2) {
  if (!(sigma > 0.0)) throw std::invalid_argument("regression_uncertainty_loss: sigma must be > 0");
  return l_reg / (sigma * sigma) + lambda2 * std::log(sigma);
}

OptimalSigma optimal_sigma(double l_reg, double lambda2) {
  if (!(l_reg > 0.0)) throw std::invalid_argument("optimal_sigma: L_reg must be positive");
  if (!(lambda2 > 0.0)) throw std::invalid_argument("optimal_sigma: lambda2 must be positive");
  const double l = std::max(l_reg, kLossFloor);
  // d/dsigma (L/sigma^2 + lambda2 log sigma) = -2L/sigma^3 + lambda2/sigma = 0.
  const double sigma2 = 2.0 * l / lambda2;
  return {sigma2, 0.5 * lambda2 * (1.0 + std::log(sigma2))};
}

std::vector<double> tempered_softmax(std::span<const double> logits, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("tempered_softmax: temperature must be > 0");
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / t);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

double temperature_approx_error(std::span<const double> logits, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("temperature_approx_error: sigma must be > 0");
  const double inv_var = 1.0 / (sigma * sigma);
  double lhs_sum = 0.0;
  double rhs_sum = 0.0;
  for (double p : logits) {
    lhs_sum += std::exp(p * inv_var);
    rhs_sum += std::exp(p);
  }
  const double lhs = lhs_sum / sigma;
  const double rhs = std::pow(rhs_sum, inv_var);
  return std::abs(lhs - rhs);
}

double kl_baseline_loss(const Offset4& pred, const Offset4& target, double m_reg, double lambda2) {
  return std::exp(-2.0 * m_reg) * l2_regression(pred, target) + lambda2 * m_reg;
}

}  // namespace swnet
