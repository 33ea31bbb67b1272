#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. They favour directness over speed.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include "swnet/eval.hpp"
#include "swnet/geometry.hpp"
#include "swnet/losses.hpp"
#include "swnet/matching.hpp"
#include "swnet/rng.hpp"

namespace oracle {

inline double box_iou(const swnet::Box& a, const swnet::Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0 || h <= 0) return 0.0;
  const double inter = w * h;
  return inter / ((a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter);
}

// Interpolated precision taken literally: max precision over every rank whose
// recall reaches r, for r = 0, 0.01, ..., 1.
inline double ap_101(const std::vector<int>& tp, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  double sum = 0.0;
  for (int j = 0; j <= 100; ++j) {
    const double r = static_cast<double>(j) / 100.0;
    double best = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < tp.size(); ++k) {
      hits += tp[k];
      const double rec = hits / static_cast<double>(num_gt);
      const double prec = hits / static_cast<double>(k + 1);
      if (rec >= r) best = std::max(best, prec);
    }
    sum += best;
  }
  return sum / 101.0;
}

// mAP by enumerating, for every ranked detection, every candidate GT.
inline double coco_map(const std::vector<std::vector<swnet::Detection>>& dets,
                       const std::vector<std::vector<swnet::GroundTruth>>& gts) {
  std::set<int> classes;
  for (const auto& s : gts) {
    for (const auto& g : s) classes.insert(g.class_id);
  }
  if (classes.empty()) return 0.0;
  double total = 0.0;
  for (int c : classes) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> ranked;  // (-score, scene, idx)
    std::size_t n_gt = 0;
    for (std::size_t s = 0; s < dets.size(); ++s) {
      for (std::size_t i = 0; i < dets[s].size(); ++i) {
        if (dets[s][i].class_id == c) ranked.emplace_back(-dets[s][i].score, s, i);
      }
      for (const auto& g : gts[s]) n_gt += g.class_id == c;
    }
    std::sort(ranked.begin(), ranked.end());
    double class_sum = 0.0;
    for (double thr : swnet::kCocoIouThresholds) {
      std::vector<std::vector<int>> taken(gts.size());
      for (std::size_t s = 0; s < gts.size(); ++s) taken[s].assign(gts[s].size(), 0);
      std::vector<int> tp;
      for (const auto& [neg_score, s, i] : ranked) {
        int pick = -1;
        double pick_iou = -1.0;
        for (std::size_t g = 0; g < gts[s].size(); ++g) {
          if (gts[s][g].class_id != c || taken[s][g]) continue;
          const double o = box_iou(dets[s][i].box, gts[s][g].box);
          if (o >= thr && o > pick_iou) {
            pick = static_cast<int>(g);
            pick_iou = o;
          }
        }
        if (pick >= 0) taken[s][static_cast<std::size_t>(pick)] = 1;
        tp.push_back(pick >= 0);
      }
      class_sum += ap_101(tp, n_gt);
    }
    total += class_sum / 10.0;
  }
  return total / static_cast<double>(classes.size());
}

// Unweighted subset form: mean classification loss over A_cls plus mean
// regression loss over A_reg.
inline double subset_loss(const std::vector<swnet::SampleRecord>& recs,
                          const std::vector<std::size_t>& a_cls,
                          const std::vector<std::size_t>& a_reg) {
  double cls = 0.0;
  for (std::size_t i : a_cls) cls += recs[i].l_cls;
  double reg = 0.0;
  for (std::size_t i : a_reg) reg += recs[i].l_reg;
  const double n1 = static_cast<double>(a_cls.size());
  const double n2 = static_cast<double>(a_reg.size());
  return (n1 > 0 ? cls / n1 : 0.0) + (n2 > 0 ? reg / n2 : 0.0);
}

struct RandomInstance {
  std::vector<std::vector<swnet::Detection>> dets;
  std::vector<std::vector<swnet::GroundTruth>> gts;
};

// Boxes on a coarse integer grid so that exact IoU ties and threshold hits occur.
inline RandomInstance random_instance(swnet::Rng& rng, std::size_t max_dets = 5,
                                      std::size_t max_gts = 3) {
  auto rand_box = [&] {
    const double x = static_cast<double>(rng.index(6));
    const double y = static_cast<double>(rng.index(6));
    const double w = 1.0 + static_cast<double>(rng.index(6));
    const double h = 1.0 + static_cast<double>(rng.index(6));
    return swnet::Box{x, y, x + w, y + h};
  };
  RandomInstance inst;
  const std::size_t scenes = 1 + rng.index(2);
  std::size_t det_budget = rng.index(max_dets + 1);
  std::size_t gt_budget = rng.index(max_gts + 1);
  inst.dets.resize(scenes);
  inst.gts.resize(scenes);
  for (std::size_t s = 0; s < scenes; ++s) {
    const bool last = s + 1 == scenes;
    const std::size_t nd = last ? det_budget : rng.index(det_budget + 1);
    const std::size_t ng = last ? gt_budget : rng.index(gt_budget + 1);
    det_budget -= nd;
    gt_budget -= ng;
    for (std::size_t g = 0; g < ng; ++g) {
      inst.gts[s].push_back({rand_box(), 1 + static_cast<int>(rng.index(2))});
    }
    for (std::size_t d = 0; d < nd; ++d) {
      swnet::Detection det;
      // Half the time copy and perturb a GT so that true positives are common.
      if (!inst.gts[s].empty() && rng.uniform() < 0.5) {
        const auto& g = inst.gts[s][rng.index(inst.gts[s].size())];
        det.box = g.box;
        det.box.x2 += static_cast<double>(rng.index(3));
        det.class_id = g.class_id;
      } else {
        det.box = rand_box();
        det.class_id = 1 + static_cast<int>(rng.index(2));
      }
      det.score = static_cast<double>(rng.index(4)) / 4.0;
      inst.dets[s].push_back(det);
    }
  }
  return inst;
}

}  // namespace oracle
