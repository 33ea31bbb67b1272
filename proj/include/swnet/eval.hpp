#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "swnet/geometry.hpp"

namespace swnet {

/// IoU thresholds 0.50:0.05:0.95, written out so 0.6 etc. are exact literals.
inline constexpr std::array<double, 10> kCocoIouThresholds{0.50, 0.55, 0.60, 0.65, 0.70,
                                                           0.75, 0.80, 0.85, 0.90, 0.95};

struct EvalReport {
  double ap = 0.0;    // mean over classes and thresholds
  double ap50 = 0.0;
  double ap75 = 0.0;
  std::array<double, 10> ap_per_threshold{};
  std::map<int, double> per_class_ap;  // classes with at least one GT
  std::size_t num_gts = 0;
  std::size_t num_dets = 0;
};

/// COCO-style AP with 101-point interpolation. Detections are matched greedily
/// in descending score order (ties by scene, then input order) to the unmatched
/// same-class GT of highest IoU, provided IoU >= threshold. Classes without
/// ground truth are excluded from the mean.
EvalReport coco_map(std::span<const std::vector<Detection>> dets,
                    std::span<const std::vector<GroundTruth>> gts);

/// 101-point interpolated AP from a ranked TP/FP sequence.
double interpolated_ap(const std::vector<bool>& is_tp, std::size_t num_gt);

}  // namespace swnet
