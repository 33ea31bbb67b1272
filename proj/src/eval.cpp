#include "swnet/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace swnet {

double interpolated_ap(const std::vector<bool>& is_tp, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  const std::size_t n = is_tp.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  double tp = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += is_tp[k] ? 1.0 : 0.0;
    recall[k] = tp / static_cast<double>(num_gt);
    precision[k] = tp / static_cast<double>(k + 1);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);

  // Recall thresholds j/100 are correctly rounded, so recall 3/10 meets 30/100.
  double sum = 0.0;
  std::size_t k = 0;
  for (int j = 0; j <= 100; ++j) {
    const double r = static_cast<double>(j) / 100.0;
    while (k < n && recall[k] < r) ++k;
    if (k < n) sum += precision[k];
  }
  return sum / 101.0;
}

EvalReport coco_map(std::span<const std::vector<Detection>> dets,
                    std::span<const std::vector<GroundTruth>> gts) {
  if (dets.size() != gts.size()) {
    throw std::invalid_argument("coco_map: detections and ground truths cover different scenes");
  }
  EvalReport rep;
  std::set<int> classes;
  for (const auto& scene : gts) {
    for (const auto& g : scene) classes.insert(g.class_id);
    rep.num_gts += scene.size();
  }
  for (const auto& scene : dets) rep.num_dets += scene.size();
  if (classes.empty()) return rep;

  struct Ref {
    std::size_t scene;
    std::size_t idx;
  };

  std::vector<std::array<double, 10>> class_ap;
  for (int c : classes) {
    std::vector<Ref> ranked;
    std::size_t n_gt = 0;
    for (std::size_t s = 0; s < dets.size(); ++s) {
      for (std::size_t i = 0; i < dets[s].size(); ++i) {
        if (dets[s][i].class_id == c) ranked.push_back({s, i});
      }
      for (const auto& g : gts[s]) n_gt += g.class_id == c ? 1 : 0;
    }
    std::stable_sort(ranked.begin(), ranked.end(), [&](const Ref& a, const Ref& b) {
      return dets[a.scene][a.idx].score > dets[b.scene][b.idx].score;
    });

    std::array<double, 10> aps{};
    for (std::size_t t = 0; t < kCocoIouThresholds.size(); ++t) {
      const double thr = kCocoIouThresholds[t];
      std::vector<std::vector<bool>> used(gts.size());
      for (std::size_t s = 0; s < gts.size(); ++s) used[s].assign(gts[s].size(), false);
      std::vector<bool> tp_flags;
      tp_flags.reserve(ranked.size());
      for (const auto& ref : ranked) {
        const auto& d = dets[ref.scene][ref.idx];
        const auto& scene_gts = gts[ref.scene];
        double best = thr;
        int best_g = -1;
        for (std::size_t g = 0; g < scene_gts.size(); ++g) {
          if (scene_gts[g].class_id != c || used[ref.scene][g]) continue;
          const double o = iou(d.box, scene_gts[g].box);
          if (o >= best && (best_g < 0 || o > best)) {
            best = o;
            best_g = static_cast<int>(g);
          }
        }
        if (best_g >= 0) used[ref.scene][static_cast<std::size_t>(best_g)] = true;
        tp_flags.push_back(best_g >= 0);
      }
      aps[t] = interpolated_ap(tp_flags, n_gt);
    }
    class_ap.push_back(aps);
    double mean = 0.0;
    for (double a : aps) mean += a;
    rep.per_class_ap[c] = mean / static_cast<double>(aps.size());
  }

  const double n_cls = static_cast<double>(class_ap.size());
  for (std::size_t t = 0; t < kCocoIouThresholds.size(); ++t) {
    double s = 0.0;
    for (const auto& aps : class_ap) s += aps[t];
    rep.ap_per_threshold[t] = s / n_cls;
  }
  double total = 0.0;
  for (const auto& [c, ap] : rep.per_class_ap) total += ap;
  rep.ap = total / n_cls;
  rep.ap50 = rep.ap_per_threshold[0];
  rep.ap75 = rep.ap_per_threshold[5];
  return rep;
}

}  // namespace swnet
