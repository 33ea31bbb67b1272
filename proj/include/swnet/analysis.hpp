#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "swnet/losses.hpp"
#include "swnet/toydet.hpp"

namespace swnet {

enum class LossKind { cls, reg };

/// Share of (weighted) loss carried by positives in each IoU bin over
/// [0.5, 1.0]. Bins are half-open except the last, which includes 1.0.
struct IoUHistogram {
  std::vector<double> edges;    // bins + 1 edges
  std::vector<double> percent;  // per bin, sums to 100 when total > 0
  std::vector<std::size_t> counts;
  double total = 0.0;

  std::size_t bins() const { return percent.size(); }
  bool empty() const { return percent.empty(); }
};

/// Only positives with IoU in [0.5, 1.0] contribute. Returns an empty
/// histogram when there are none or when the total loss is zero.
IoUHistogram loss_distribution_by_iou(std::span<const SampleRecord> records, LossKind which,
                                      bool weighted, double bin_width = 0.1);

struct ConvergenceSeries {
  std::vector<int> iter;
  std::vector<double> w_cls_pos;
  std::vector<double> w_cls_neg;
  std::vector<double> w_reg_pos;
  std::vector<double> w_cls_all;
  std::vector<double> mean_lcls;
  std::vector<double> mean_lreg;

  std::size_t size() const { return iter.size(); }
};

/// Trailing moving average over at most `width` iterations; width 1 is the
/// identity.
std::vector<double> moving_average(std::span<const double> v, std::size_t width);

ConvergenceSeries convergence_trace(const TrainHistory& h, std::size_t width = 50);

/// Mean of v over the first (or last) ceil(n/10) entries.
double first_decile_mean(std::span<const double> v);
double last_decile_mean(std::span<const double> v);

struct SensitivityResult {
  std::vector<double> biases;
  std::vector<std::vector<double>> cls_traces;  // smoothed mean classification weight
  std::vector<std::vector<double>> reg_traces;  // smoothed mean positive regression weight
  int k = 0;
  double cls_gap = 0.0;  // max pairwise |trace_i(k) - trace_j(k)|
  double reg_gap = 0.0;
  double cls_mean = 0.0;  // mean of trace_i(k) over biases
  double reg_mean = 0.0;

  double cls_relative_gap() const { return cls_mean != 0.0 ? cls_gap / cls_mean : 0.0; }
  double reg_relative_gap() const { return reg_mean != 0.0 ? reg_gap / reg_mean : 0.0; }
};

/// Runs base (forced to the swn strategy) once per bias, with the bias used as
/// the initial last-layer bias of both weight heads and everything else shared.
/// Runs stop at iteration k; traces are smoothed with `width`. jobs > 1 runs
/// independent trainings concurrently; results do not depend on jobs.
SensitivityResult init_sensitivity(const TrainConfig& base, std::span<const double> biases,
                                   int k = 500, std::size_t width = 50, std::size_t jobs = 1);

struct LambdaRow {
  double lambda = 0.0;
  double map = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double mean_w_cls = 0.0;
  double mean_w_reg = 0.0;
};

/// One swn run per lambda with lambda1 = lambda2 = lambda.
std::vector<LambdaRow> lambda_sweep(const TrainConfig& base, std::span<const double> lambdas,
                                    std::size_t jobs = 1);

}  // namespace swnet
