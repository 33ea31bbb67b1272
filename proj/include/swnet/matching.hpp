#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swnet/geometry.hpp"

namespace swnet {

enum class SampleLabel : std::uint8_t { positive, negative, ignore };

/// Per-anchor assignment to ground truth.
struct MatchResult {
  std::vector<int> assigned_gt;  // -1 when unassigned
  std::vector<double> max_iou;
  std::vector<SampleLabel> label;
  std::vector<int> class_id;  // 0 (background) unless positive

  std::size_t size() const { return label.size(); }
  bool is_positive(std::size_t i) const { return label[i] == SampleLabel::positive; }
  bool is_negative(std::size_t i) const { return label[i] == SampleLabel::negative; }
  std::vector<std::size_t> positives() const;
  std::vector<std::size_t> negatives() const;
};

/// Per-sample weights over a batch: the S^cls and S^reg vectors.
struct WeightAssignment {
  std::vector<double> s_cls;
  std::vector<double> s_reg;

  std::size_t size() const { return s_cls.size(); }
};

struct StrategyConfig {
  int n_p = 32;
  int n_n = 96;
  double gamma = 2.0;
  double rho = 0.5;
  double pos_thr = 0.5;
  double neg_thr = 0.4;
  double nms_thr = 0.7;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Strategy { random, ohem, focal, kl, rpn, swn };

Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy s);

MatchResult match_anchors(const AnchorSet& anchors, std::span<const GroundTruth> gts,
                          const StrategyConfig& cfg);

/// Uniform sampling of n_p positives and n_n negatives, driven by `seed`.
WeightAssignment random_sampling_weights(const MatchResult& m, const StrategyConfig& cfg,
                                         std::uint64_t seed);
inline WeightAssignment random_sampling_weights(const MatchResult& m, const StrategyConfig& cfg) {
  return random_sampling_weights(m, cfg, cfg.seed);
}

/// Top-n_p positives and top-n_n negatives by classification loss.
WeightAssignment ohem_weights(const MatchResult& m, std::span<const double> cls_losses,
                              const StrategyConfig& cfg);

/// s_cls = (1 - p)^gamma on every labelled anchor, s_reg = 1 on positives.
WeightAssignment focal_weights(const MatchResult& m, std::span<const double> probs,
                               const StrategyConfig& cfg);

/// Classification weights from random sampling, s_reg = 1/sigma^2 on positives.
WeightAssignment kl_regression_weights(const MatchResult& m, std::span<const double> sigma2,
                                       const StrategyConfig& cfg, std::uint64_t seed);
inline WeightAssignment kl_regression_weights(const MatchResult& m, std::span<const double> sigma2,
                                              const StrategyConfig& cfg) {
  return kl_regression_weights(m, sigma2, cfg, cfg.seed);
}

/// s_cls = 1[score > rho] * 1[anchor survives NMS]; s_reg = s_cls on positives.
WeightAssignment rpn_score_weights(const MatchResult& m, std::span<const double> fg_scores,
                                   std::span<const std::size_t> nms_kept,
                                   const StrategyConfig& cfg);

/// Class-agnostic NMS over proposal boxes scored by foreground probability.
std::vector<std::size_t> rpn_nms_keep(std::span<const Box> boxes, std::span<const double> fg_scores,
                                      double nms_thr);

}  // namespace swnet
