#include "swnet/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "swnet/rng.hpp"

namespace swnet {

std::vector<std::size_t> MatchResult::positives() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == SampleLabel::positive) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> MatchResult::negatives() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] == SampleLabel::negative) out.push_back(i);
  }
  return out;
}

void StrategyConfig::validate() const {
  if (n_p < 0 || n_n < 0) throw std::invalid_argument("strategy: n_p and n_n must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("strategy: gamma must be >= 0");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("strategy: rho must lie in [0, 1]");
  if (!(neg_thr <= pos_thr)) throw std::invalid_argument("strategy: neg_thr must be <= pos_thr");
  if (!(nms_thr >= 0.0 && nms_thr <= 1.0)) {
    throw std::invalid_argument("strategy: nms_thr must lie in [0, 1]");
  }
}

Strategy parse_strategy(std::string_view name) {
  if (name == "random") return Strategy::random;
  if (name == "ohem") return Strategy::ohem;
  if (name == "focal") return Strategy::focal;
  if (name == "kl") return Strategy::kl;
  if (name == "rpn") return Strategy::rpn;
  if (name == "swn") return Strategy::swn;
  throw std::invalid_argument("unknown strategy '" + std::string(name) +
                              "' (expected random|ohem|focal|kl|rpn|swn)");
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::ohem: return "ohem";
    case Strategy::focal: return "focal";
    case Strategy::kl: return "kl";
    case Strategy::rpn: return "rpn";
    case Strategy::swn: return "swn";
  }
  return "unknown";
}

MatchResult match_anchors(const AnchorSet& anchors, std::span<const GroundTruth> gts,
                          const StrategyConfig& cfg) {
  if (anchors.anchors.empty()) throw std::invalid_argument("match_anchors: empty anchor set");
  if (!(cfg.neg_thr <= cfg.pos_thr)) {
    throw std::invalid_argument("match_anchors: neg_thr must be <= pos_thr");
  }
  const std::size_t n = anchors.size();
  MatchResult m;
  m.assigned_gt.assign(n, -1);
  m.max_iou.assign(n, 0.0);
  m.label.assign(n, SampleLabel::negative);
  m.class_id.assign(n, 0);

  std::vector<double> gt_best_iou(gts.size(), 0.0);
  std::vector<std::size_t> gt_best_anchor(gts.size(), 0);
  std::vector<int> best_gt(n, -1);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double o = iou(anchors.anchors[i], gts[g].box);
      if (o > m.max_iou[i]) {
        m.max_iou[i] = o;
        best_gt[i] = static_cast<int>(g);
      }
      if (o > gt_best_iou[g]) {
        gt_best_iou[g] = o;
        gt_best_anchor[g] = i;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (best_gt[i] >= 0 && m.max_iou[i] >= cfg.pos_thr) {
      m.label[i] = SampleLabel::positive;
      m.assigned_gt[i] = best_gt[i];
    } else if (m.max_iou[i] < cfg.neg_thr) {
      m.label[i] = SampleLabel::negative;
    } else {
      m.label[i] = SampleLabel::ignore;
    }
  }

  // Every GT keeps at least its best-overlapping anchor.
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best_iou[g] <= 0.0) continue;
    const std::size_t i = gt_best_anchor[g];
    if (m.label[i] != SampleLabel::positive) {
      m.label[i] = SampleLabel::positive;
      m.assigned_gt[i] = static_cast<int>(g);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (m.label[i] == SampleLabel::positive) {
      m.class_id[i] = gts[static_cast<std::size_t>(m.assigned_gt[i])].class_id;
    }
  }
  return m;
}

namespace {

WeightAssignment zero_weights(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

void check_aligned(const MatchResult& m, std::size_t len, const char* what) {
  if (len != m.size()) {
    throw std::invalid_argument(std::string(what) + ": per-sample vector not aligned with anchors");
  }
}

// Partial Fisher-Yates: the first k entries become a uniform k-subset.
void select_uniform(std::vector<std::size_t> pool, std::size_t k, Rng& rng,
                    std::vector<double>& s_cls) {
  k = std::min(k, pool.size());
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pick = j + rng.index(pool.size() - j);
    std::swap(pool[j], pool[pick]);
    s_cls[pool[j]] = 1.0;
  }
}

void regression_from_indicator(const MatchResult& m, WeightAssignment& w) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    w.s_reg[i] = (w.s_cls[i] == 1.0 && m.is_positive(i)) ? 1.0 : 0.0;
  }
}

}  // namespace

WeightAssignment random_sampling_weights(const MatchResult& m, const StrategyConfig& cfg,
                                         std::uint64_t seed) {
  auto w = zero_weights(m.size());
  Rng rng(seed);
  Rng pos_rng = rng.split(1);
  Rng neg_rng = rng.split(2);
  select_uniform(m.positives(), static_cast<std::size_t>(std::max(cfg.n_p, 0)), pos_rng, w.s_cls);
  select_uniform(m.negatives(), static_cast<std::size_t>(std::max(cfg.n_n, 0)), neg_rng, w.s_cls);
  regression_from_indicator(m, w);
  return w;
}

WeightAssignment ohem_weights(const MatchResult& m, std::span<const double> cls_losses,
                              const StrategyConfig& cfg) {
  check_aligned(m, cls_losses.size(), "ohem_weights");
  auto w = zero_weights(m.size());
  auto take_top = [&](std::vector<std::size_t> idx, int count) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return cls_losses[a] > cls_losses[b];
    });
    const std::size_t k = std::min(idx.size(), static_cast<std::size_t>(std::max(count, 0)));
    for (std::size_t j = 0; j < k; ++j) w.s_cls[idx[j]] = 1.0;
  };
  take_top(m.positives(), cfg.n_p);
  take_top(m.negatives(), cfg.n_n);
  regression_from_indicator(m, w);
  return w;
}

WeightAssignment focal_weights(const MatchResult& m, std::span<const double> probs,
                               const StrategyConfig& cfg) {
  check_aligned(m, probs.size(), "focal_weights");
  auto w = zero_weights(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.label[i] == SampleLabel::ignore) continue;
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("focal_weights: prob outside [0, 1]");
    w.s_cls[i] = std::pow(1.0 - p, cfg.gamma);
    w.s_reg[i] = m.is_positive(i) ? 1.0 : 0.0;
  }
  return w;
}

WeightAssignment kl_regression_weights(const MatchResult& m, std::span<const double> sigma2,
                                       const StrategyConfig& cfg, std::uint64_t seed) {
  check_aligned(m, sigma2.size(), "kl_regression_weights");
  auto w = random_sampling_weights(m, cfg, seed);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.is_positive(i)) {
      w.s_reg[i] = 0.0;
      continue;
    }
    if (!(sigma2[i] > 0.0)) {
      throw std::invalid_argument("kl_regression_weights: variance must be positive");
    }
    w.s_reg[i] = 1.0 / sigma2[i];
  }
  return w;
}

WeightAssignment rpn_score_weights(const MatchResult& m, std::span<const double> fg_scores,
                                   std::span<const std::size_t> nms_kept,
                                   const StrategyConfig& cfg) {
  check_aligned(m, fg_scores.size(), "rpn_score_weights");
  std::vector<bool> kept(m.size(), false);
  for (std::size_t k : nms_kept) {
    if (k >= m.size()) throw std::invalid_argument("rpn_score_weights: kept index out of range");
    kept[k] = true;
  }
  auto w = zero_weights(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.label[i] == SampleLabel::ignore) continue;
    w.s_cls[i] = (fg_scores[i] > cfg.rho && kept[i]) ? 1.0 : 0.0;
  }
  regression_from_indicator(m, w);
  return w;
}

std::vector<std::size_t> rpn_nms_keep(std::span<const Box> boxes, std::span<const double> fg_scores,
                                      double nms_thr) {
  if (fg_scores.size() != boxes.size()) {
    throw std::invalid_argument("rpn_nms_keep: scores not aligned with boxes");
  }
  std::vector<Detection> dets(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) dets[i] = {boxes[i], 1, fg_scores[i]};
  return nms_keep(dets, nms_thr);
}

}  // namespace swnet
