#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swnet/eval.hpp"
#include "swnet/geometry.hpp"
#include "swnet/losses.hpp"
#include "swnet/matching.hpp"
#include "swnet/nn.hpp"
#include "swnet/swn.hpp"

namespace swnet {

/// Synthetic scene generator. Anchors live on a grid x grid lattice over a
/// square canvas. Per-anchor features encode the anchor's overlap with the
/// nearest true object, the true box offsets and a class signature, plus
/// Gaussian noise. Annotations are the true boxes with independent
/// coordinate jitter and class labels flipped with probability label_flip.
struct SceneConfig {
  double canvas = 64.0;
  int grid = 8;
  std::vector<double> anchor_scales{2.0, 3.5};
  std::vector<double> anchor_ratios{0.5, 1.0, 2.0};
  int min_objects = 1;
  int max_objects = 3;
  int num_classes = 3;
  double min_size = 14.0;
  double max_size = 36.0;
  int feature_dim = 16;
  double signal = 1.0;
  double box_jitter = 3.2;
  double label_flip = 0.2;
  double feature_noise = 0.1;
  std::uint64_t seed = 7;  // class prototypes

  void validate() const;
  GridSpec grid_spec() const { return {grid, grid, canvas / grid}; }
};

struct Scene {
  std::vector<GroundTruth> truth;
  std::vector<GroundTruth> annotations;
  std::vector<bool> flipped;  // per object: annotated class differs from truth
  std::size_t feature_dim = 0;
  std::vector<double> features;  // anchors x feature_dim, row-major

  std::span<const double> feature(std::size_t anchor) const {
    return {features.data() + anchor * feature_dim, feature_dim};
  }
};

AnchorSet scene_anchors(const SceneConfig& cfg);
Scene generate_scene(const SceneConfig& cfg, const AnchorSet& anchors, std::uint64_t seed);
Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

/// Classification head: feature -> C+1 logits (index 0 is background).
/// Regression head: feature -> (dx, dy, dw, dh, log sigma); the last channel is
/// only trained by the kl strategy.
struct DetectorParams {
  MlpParams cls;
  MlpParams reg;
};

DetectorParams init_detector(const SceneConfig& cfg, std::size_t hidden, std::uint64_t seed);

struct AnchorPrediction {
  std::vector<double> logits;
  Offset4 offset;
  double log_sigma = 0.0;
};

AnchorPrediction detector_predict(const DetectorParams& p, std::span<const double> feature);
std::vector<AnchorPrediction> detector_forward(const DetectorParams& p, const Scene& scene,
                                               const AnchorSet& anchors);

/// Scores every anchor for every foreground class, then per-class NMS and a
/// per-scene cap.
std::vector<Detection> detect(const DetectorParams& p, const Scene& scene,
                              const AnchorSet& anchors, double score_thr = 0.05,
                              double nms_thr = 0.5, std::size_t max_dets = 100);

EvalReport evaluate_detector(const DetectorParams& p, std::span<const Scene> scenes,
                             const AnchorSet& anchors);

struct TrainConfig {
  SceneConfig scene;
  int epochs = 12;
  int iters_per_epoch = 100;
  int batch_scenes = 2;
  Strategy strategy = Strategy::random;
  StrategyConfig sampling;
  RegularizerConfig reg;
  SwnConfig swn;
  std::size_t det_hidden = 32;
  double det_lr = 0.02;
  double det_momentum = 0.9;
  double weight_decay = 1e-4;
  double swn_lr = 0.001;
  /// Fractions of total iterations after which both learning rates drop.
  std::vector<double> lr_decay_at{2.0 / 3.0, 11.0 / 12.0};
  double lr_decay = 0.1;
  int eval_scenes = 64;
  /// Stop after this many iterations (0 = run the full schedule). The
  /// learning-rate schedule is still computed from the full schedule.
  int max_iterations = 0;
  bool eval_each_epoch = true;
  std::uint64_t seed = 2020;

  void validate() const;
  int total_iterations() const { return epochs * iters_per_epoch; }
};

struct IterationRecord {
  int iter = 0;  // 1-based
  int epoch = 0;
  double mean_lcls = 0.0;
  double mean_lreg = 0.0;
  double w_cls_pos = 0.0;
  double w_cls_neg = 0.0;
  double w_reg_pos = 0.0;
  double w_cls_all = 0.0;
  double raw_w_cls_pos = 0.0;  // before batch smoothing (swn only)
  double objective = 0.0;
  double lr = 0.0;
  double map = 0.0;
  bool has_map = false;
};

struct PositiveSample {
  SampleRecord rec;
  double raw_w_cls = 0.0;
  bool label_flipped = false;
};

struct EpochSnapshot {
  int epoch = 0;  // 1-based
  std::vector<PositiveSample> positives;
  EvalReport eval;
  bool evaluated = false;
};

struct TrainHistory {
  std::vector<IterationRecord> iterations;
  std::vector<EpochSnapshot> epochs;
  EvalReport initial_eval;

  double final_map() const;
};

struct TrainResult {
  DetectorParams detector;
  SwnParams swn;
  TrainHistory history;
};

/// Read-only view of one iteration, handed to an optional observer.
struct IterationView {
  int iter = 0;
  Strategy strategy = Strategy::random;
  std::span<const SampleRecord> records;  // labelled anchors of the batch
  const WeightAssignment* weights = nullptr;
  LossNormalization norm;
  double objective = 0.0;
};

using IterationObserver = std::function<void(const IterationView&)>;

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int iteration, std::size_t sample);
  int iteration() const { return iteration_; }
  std::size_t sample() const { return sample_; }

 private:
  int iteration_;
  std::size_t sample_;
};

TrainResult train(const TrainConfig& cfg, const IterationObserver& observer = {});

struct ComparisonRow {
  std::string strategy;
  double map = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double mean_w_cls = 0.0;
  double mean_w_reg = 0.0;
};

/// One training run per strategy, all sharing base's seeds and data.
std::vector<ComparisonRow> run_strategy_comparison(const TrainConfig& base,
                                                   std::span<const Strategy> strategies);

/// Frozen benchmark used by the acceptance suite and the default config.
TrainConfig standard_noisy_benchmark();

}  // namespace swnet
