#include "swnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace swnet {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads, keeping output order.
template <class T, class Fn>
std::vector<T> run_indexed(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<T> out(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  for (std::size_t start = 0; start < n; start += jobs) {
    std::vector<std::future<T>> futs;
    const std::size_t end = std::min(n, start + jobs);
    for (std::size_t i = start; i < end; ++i) futs.push_back(std::async(std::launch::async, fn, i));
    for (std::size_t i = start; i < end; ++i) out[i] = futs[i - start].get();
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

IoUHistogram loss_distribution_by_iou(std::span<const SampleRecord> records, LossKind which,
                                      bool weighted, double bin_width) {
  if (!(bin_width > 0.0 && bin_width <= 0.5)) {
    throw std::invalid_argument("loss_distribution_by_iou: bin_width must lie in (0, 0.5]");
  }
  const auto bins = static_cast<std::size_t>(std::ceil(0.5 / bin_width - 1e-9));
  IoUHistogram h;
  std::vector<double> mass(bins, 0.0);
  std::vector<std::size_t> counts(bins, 0);
  bool any = false;
  for (const auto& r : records) {
    if (!r.positive() || !(r.iou >= 0.5) || r.iou > 1.0) continue;
    auto b = static_cast<std::size_t>(std::floor((r.iou - 0.5) / bin_width + 1e-9));
    b = std::min(b, bins - 1);
    const double loss = which == LossKind::cls ? r.l_cls : r.l_reg;
    const double w = weighted ? (which == LossKind::cls ? r.s_cls : r.s_reg) : 1.0;
    mass[b] += w * loss;
    ++counts[b];
    any = true;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (!any || !(total > 0.0)) return h;
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(std::min(1.0, 0.5 + bin_width * static_cast<double>(b)));
  h.edges.back() = 1.0;
  for (double m : mass) h.percent.push_back(100.0 * m / total);
  h.counts = counts;
  h.total = total;
  return h;
}

std::vector<double> moving_average(std::span<const double> v, std::size_t width) {
  if (width == 0) throw std::invalid_argument("moving_average: width must be >= 1");
  // Direct window sums: no running-sum drift, so width 1 is exactly the identity.
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t lo = i + 1 >= width ? i + 1 - width : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += v[j];
    out[i] = s / static_cast<double>(i + 1 - lo);
  }
  return out;
}

ConvergenceSeries convergence_trace(const TrainHistory& h, std::size_t width) {
  if (h.iterations.empty()) throw std::invalid_argument("convergence_trace: empty history");
  ConvergenceSeries raw;
  for (const auto& r : h.iterations) {
    raw.iter.push_back(r.iter);
    raw.w_cls_pos.push_back(r.w_cls_pos);
    raw.w_cls_neg.push_back(r.w_cls_neg);
    raw.w_reg_pos.push_back(r.w_reg_pos);
    raw.w_cls_all.push_back(r.w_cls_all);
    raw.mean_lcls.push_back(r.mean_lcls);
    raw.mean_lreg.push_back(r.mean_lreg);
  }
  ConvergenceSeries s;
  s.iter = raw.iter;
  s.w_cls_pos = moving_average(raw.w_cls_pos, width);
  s.w_cls_neg = moving_average(raw.w_cls_neg, width);
  s.w_reg_pos = moving_average(raw.w_reg_pos, width);
  s.w_cls_all = moving_average(raw.w_cls_all, width);
  s.mean_lcls = moving_average(raw.mean_lcls, width);
  s.mean_lreg = moving_average(raw.mean_lreg, width);
  return s;
}

double first_decile_mean(std::span<const double> v) {
  const std::size_t n = (v.size() + 9) / 10;
  return mean(v.first(n));
}

double last_decile_mean(std::span<const double> v) {
  const std::size_t n = (v.size() + 9) / 10;
  return mean(v.last(n));
}

SensitivityResult init_sensitivity(const TrainConfig& base, std::span<const double> biases,
                                   int k, std::size_t width, std::size_t jobs) {
  if (k <= 0) throw std::invalid_argument("init_sensitivity: k must be >= 1");
  SensitivityResult res;
  res.biases.assign(biases.begin(), biases.end());
  res.k = k;
  if (biases.empty()) return res;

  using Traces = std::pair<std::vector<double>, std::vector<double>>;
  auto runs = run_indexed<Traces>(biases.size(), jobs, [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.strategy = Strategy::swn;
    cfg.swn.last_bias_init = biases[i];
    cfg.max_iterations = k;
    cfg.eval_each_epoch = false;
    const auto result = train(cfg);
    std::vector<double> cls, reg;
    for (const auto& r : result.history.iterations) {
      cls.push_back(r.w_cls_all);
      reg.push_back(r.w_reg_pos);
    }
    return Traces{moving_average(cls, width), moving_average(reg, width)};
  });

  std::vector<double> cls_at, reg_at;
  for (auto& [cls, reg] : runs) {
    if (cls.empty()) throw std::runtime_error("init_sensitivity: run produced no iterations");
    cls_at.push_back(cls.back());
    reg_at.push_back(reg.back());
    res.cls_traces.push_back(std::move(cls));
    res.reg_traces.push_back(std::move(reg));
  }
  auto gap = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  res.cls_gap = gap(cls_at);
  res.reg_gap = gap(reg_at);
  res.cls_mean = mean(cls_at);
  res.reg_mean = mean(reg_at);
  return res;
}

std::vector<LambdaRow> lambda_sweep(const TrainConfig& base, std::span<const double> lambdas,
                                    std::size_t jobs) {
  return run_indexed<LambdaRow>(lambdas.size(), jobs, [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.strategy = Strategy::swn;
    cfg.reg.lambda1 = lambdas[i];
    cfg.reg.lambda2 = lambdas[i];
    const Strategy s = Strategy::swn;
    const auto row = run_strategy_comparison(cfg, std::span<const Strategy>(&s, 1)).front();
    return LambdaRow{lambdas[i], row.map, row.ap50, row.ap75, row.mean_w_cls, row.mean_w_reg};
  });
}

}  // namespace swnet
