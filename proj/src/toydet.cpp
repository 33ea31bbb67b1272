#include "swnet/toydet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "swnet/rng.hpp"

namespace swnet {

namespace {

constexpr int kFixedFeatures = 5;  // overlap + 4 offsets

// Seed streams; every random decision of a run derives from TrainConfig::seed.
enum Stream : std::uint64_t {
  kTrainScenes = 1,
  kEvalScenes = 2,
  kDetectorInit = 3,
  kSwnInit = 4,
  kSampling = 5,
  kShuffle = 6,
  kPrototypes = 7,
};

std::vector<std::vector<double>> class_prototypes(const SceneConfig& cfg) {
  // Gram-Schmidt on Gaussian draws: unit, mutually orthogonal signatures.
  const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim - kFixedFeatures);
  Rng rng(derive_seed(cfg.seed, kPrototypes));
  std::vector<std::vector<double>> protos;
  for (int c = 0; c < cfg.num_classes; ++c) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& u : protos) {
      const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    protos.push_back(std::move(v));
  }
  return protos;
}

Box jitter_box(const Box& b, double std, Rng& rng) {
  Box j{b.x1 + rng.normal(0.0, std), b.y1 + rng.normal(0.0, std), b.x2 + rng.normal(0.0, std),
        b.y2 + rng.normal(0.0, std)};
  if (j.x2 - j.x1 < 1.0) {
    const double c = j.cx();
    j.x1 = c - 0.5;
    j.x2 = c + 0.5;
  }
  if (j.y2 - j.y1 < 1.0) {
    const double c = j.cy();
    j.y1 = c - 0.5;
    j.y2 = c + 0.5;
  }
  return j;
}

}  // namespace

void SceneConfig::validate() const {
  if (!(canvas > 0.0) || grid <= 0) throw std::invalid_argument("scene: canvas and grid must be > 0");
  if (num_classes < 2) throw std::invalid_argument("scene: num_classes must be >= 2");
  if (min_objects < 0 || max_objects < min_objects) {
    throw std::invalid_argument("scene: need 0 <= min_objects <= max_objects");
  }
  if (!(min_size > 1.0) || max_size < min_size || max_size >= canvas) {
    throw std::invalid_argument("scene: need 1 < min_size <= max_size < canvas");
  }
  if (feature_dim < kFixedFeatures + num_classes) {
    throw std::invalid_argument("scene: feature_dim must be >= 5 + num_classes");
  }
  if (!(label_flip >= 0.0 && label_flip <= 1.0)) {
    throw std::invalid_argument("scene: label_flip must lie in [0, 1]");
  }
  if (!(box_jitter >= 0.0) || !(feature_noise >= 0.0) || !(signal >= 0.0)) {
    throw std::invalid_argument("scene: noise and signal knobs must be >= 0");
  }
}

AnchorSet scene_anchors(const SceneConfig& cfg) {
  return generate_anchors(cfg.grid_spec(), cfg.anchor_scales, cfg.anchor_ratios);
}

Scene generate_scene(const SceneConfig& cfg, const AnchorSet& anchors, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Rng obj_rng = rng.split(1);
  Rng noise_rng = rng.split(2);
  Rng annot_rng = rng.split(3);

  Scene scene;
  const int span = cfg.max_objects - cfg.min_objects + 1;
  const int n_obj = cfg.min_objects + static_cast<int>(obj_rng.index(static_cast<std::size_t>(span)));
  for (int k = 0; k < n_obj; ++k) {
    const double w = obj_rng.uniform(cfg.min_size, cfg.max_size);
    const double h = obj_rng.uniform(cfg.min_size, cfg.max_size);
    const double cx = obj_rng.uniform(0.5 * w, cfg.canvas - 0.5 * w);
    const double cy = obj_rng.uniform(0.5 * h, cfg.canvas - 0.5 * h);
    const int cls = 1 + static_cast<int>(obj_rng.index(static_cast<std::size_t>(cfg.num_classes)));
    scene.truth.push_back({{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}, cls});
  }

  for (const auto& t : scene.truth) {
    GroundTruth a = t;
    if (cfg.box_jitter > 0.0) a.box = jitter_box(t.box, cfg.box_jitter, annot_rng);
    bool flipped = false;
    if (annot_rng.bernoulli(cfg.label_flip)) {
      // Uniform over the other foreground classes.
      const int shift = 1 + static_cast<int>(annot_rng.index(static_cast<std::size_t>(cfg.num_classes - 1)));
      a.class_id = (t.class_id - 1 + shift) % cfg.num_classes + 1;
      flipped = true;
    }
    scene.annotations.push_back(a);
    scene.flipped.push_back(flipped);
  }

  const auto protos = class_prototypes(cfg);
  const std::size_t dim = static_cast<std::size_t>(cfg.feature_dim);
  scene.feature_dim = dim;
  scene.features.assign(anchors.size() * dim, 0.0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Box& a = anchors.anchors[i];
    double q = 0.0;
    int best = -1;
    for (std::size_t j = 0; j < scene.truth.size(); ++j) {
      const double o = iou(a, scene.truth[j].box);
      if (o > q) {
        q = o;
        best = static_cast<int>(j);
      }
    }
    double* f = scene.features.data() + i * dim;
    f[0] = q;
    if (best >= 0) {
      const auto& obj = scene.truth[static_cast<std::size_t>(best)];
      const Offset4 t = encode_offsets(a, obj.box);
      f[1] = std::clamp(t.dx, -2.0, 2.0);
      f[2] = std::clamp(t.dy, -2.0, 2.0);
      f[3] = std::clamp(t.dw, -2.0, 2.0);
      f[4] = std::clamp(t.dh, -2.0, 2.0);
      const auto& u = protos[static_cast<std::size_t>(obj.class_id - 1)];
      for (std::size_t m = 0; m < u.size(); ++m) f[kFixedFeatures + m] = cfg.signal * q * u[m];
    }
    if (cfg.feature_noise > 0.0) {
      for (std::size_t m = 0; m < dim; ++m) f[m] += noise_rng.normal(0.0, cfg.feature_noise);
    }
  }
  return scene;
}

Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  return generate_scene(cfg, scene_anchors(cfg), seed);
}

DetectorParams init_detector(const SceneConfig& cfg, std::size_t hidden, std::uint64_t seed) {
  const std::size_t d = static_cast<std::size_t>(cfg.feature_dim);
  const std::size_t c = static_cast<std::size_t>(cfg.num_classes) + 1;
  Rng rng(seed);
  DetectorParams p;
  const std::vector<std::size_t> cls_dims{d, hidden, c};
  const std::vector<std::size_t> reg_dims{d, hidden, 5};
  p.cls = make_mlp(cls_dims, Activation::relu, Activation::identity);
  p.reg = make_mlp(reg_dims, Activation::relu, Activation::identity);
  for (MlpParams* net : {&p.cls, &p.reg}) {
    for (auto& l : net->layers) {
      l = init_gaussian(l.in, l.out, 0.0, 1.0 / std::sqrt(static_cast<double>(l.in)), rng, l.act);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    net->touch();
  }
  return p;
}

AnchorPrediction detector_predict(const DetectorParams& p, std::span<const double> feature) {
  AnchorPrediction out;
  out.logits = mlp_predict(p.cls, feature);
  const auto r = mlp_predict(p.reg, feature);
  out.offset = {r[0], r[1], r[2], r[3]};
  out.log_sigma = r[4];
  return out;
}

std::vector<AnchorPrediction> detector_forward(const DetectorParams& p, const Scene& scene,
                                               const AnchorSet& anchors) {
  std::vector<AnchorPrediction> out;
  out.reserve(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) out.push_back(detector_predict(p, scene.feature(i)));
  return out;
}

std::vector<Detection> detect(const DetectorParams& p, const Scene& scene,
                              const AnchorSet& anchors, double score_thr, double nms_thr,
                              std::size_t max_dets) {
  std::vector<Detection> cands;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto pred = detector_predict(p, scene.feature(i));
    const auto prob = tempered_softmax(pred.logits, 1.0);
    Box box;
    bool decoded = false;
    for (std::size_t c = 1; c < prob.size(); ++c) {
      if (prob[c] < score_thr) continue;
      if (!decoded) {
        Offset4 off = pred.offset;
        off.dw = std::clamp(off.dw, -4.0, 4.0);
        off.dh = std::clamp(off.dh, -4.0, 4.0);
        box = decode_offsets(anchors.anchors[i], off);
        decoded = true;
      }
      cands.push_back({box, static_cast<int>(c), prob[c]});
    }
  }
  auto kept = nms(cands, nms_thr);
  if (kept.size() > max_dets) kept.resize(max_dets);
  return kept;
}

EvalReport evaluate_detector(const DetectorParams& p, std::span<const Scene> scenes,
                             const AnchorSet& anchors) {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<GroundTruth>> gts;
  dets.reserve(scenes.size());
  gts.reserve(scenes.size());
  for (const auto& s : scenes) {
    dets.push_back(detect(p, s, anchors));
    gts.push_back(s.truth);
  }
  return coco_map(dets, gts);
}

void TrainConfig::validate() const {
  scene.validate();
  sampling.validate();
  reg.validate();
  swn.validate();
  if (epochs < 0 || iters_per_epoch <= 0 || batch_scenes <= 0) {
    throw std::invalid_argument("train: epochs >= 0, iters_per_epoch > 0, batch_scenes > 0");
  }
  if (!(det_lr > 0.0) || !(swn_lr > 0.0)) throw std::invalid_argument("train: learning rates must be > 0");
  if (det_hidden == 0) throw std::invalid_argument("train: det_hidden must be >= 1");
  if (eval_scenes < 0 || max_iterations < 0) {
    throw std::invalid_argument("train: eval_scenes and max_iterations must be >= 0");
  }
  for (double f : lr_decay_at) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("train: lr_decay_at entries must lie in [0, 1]");
  }
}

double TrainHistory::final_map() const {
  for (auto it = epochs.rbegin(); it != epochs.rend(); ++it) {
    if (it->evaluated) return it->eval.ap;
  }
  return initial_eval.ap;
}

TrainingDiverged::TrainingDiverged(int iteration, std::size_t sample)
    : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration) +
                         ", sample " + std::to_string(sample)),
      iteration_(iteration),
      sample_(sample) {}

namespace {

struct BatchAnchor {
  std::size_t scene = 0;   // index into the batch
  std::size_t anchor = 0;  // index into the anchor set
};

double lr_scale(const TrainConfig& cfg, int iter0) {
  const double total = static_cast<double>(std::max(cfg.total_iterations(), 1));
  double scale = 1.0;
  for (double f : cfg.lr_decay_at) {
    if (static_cast<double>(iter0) >= f * total) scale *= cfg.lr_decay;
  }
  return scale;
}

template <class Pred>
double mean_where(std::span<const double> v, std::size_t n, Pred&& pred) {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (pred(i)) {
      s += v[i];
      ++c;
    }
  }
  return c ? s / static_cast<double>(c) : 0.0;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  const AnchorSet anchors = scene_anchors(cfg.scene);
  const std::size_t n_anchor = anchors.size();
  const double clip = cfg.swn.clip_bound;

  TrainResult result;
  result.detector = init_detector(cfg.scene, cfg.det_hidden, derive_seed(cfg.seed, kDetectorInit));
  result.swn = init_swn(cfg.swn, derive_seed(cfg.seed, kSwnInit));
  auto& det = result.detector;
  auto& swn = result.swn;
  auto& hist = result.history;

  std::vector<Scene> eval_set;
  for (int k = 0; k < cfg.eval_scenes; ++k) {
    eval_set.push_back(generate_scene(cfg.scene, anchors, derive_seed(cfg.seed, kEvalScenes, k)));
  }
  if (cfg.eval_each_epoch && !eval_set.empty()) hist.initial_eval = evaluate_detector(det, eval_set, anchors);
  if (cfg.epochs == 0) return result;

  const std::size_t n_train = static_cast<std::size_t>(cfg.iters_per_epoch) * cfg.batch_scenes;
  std::vector<Scene> train_set;
  std::vector<MatchResult> train_match;
  train_set.reserve(n_train);
  for (std::size_t k = 0; k < n_train; ++k) {
    train_set.push_back(generate_scene(cfg.scene, anchors, derive_seed(cfg.seed, kTrainScenes, k)));
    train_match.push_back(match_anchors(anchors, train_set.back().annotations, cfg.sampling));
  }

  OptimizerState det_opt = OptimizerState::sgd(cfg.det_lr, cfg.det_momentum, cfg.weight_decay);
  OptimizerState swn_opt = OptimizerState::adam(cfg.swn_lr, cfg.weight_decay);

  const std::size_t batch_n = static_cast<std::size_t>(cfg.batch_scenes) * n_anchor;
  const int total = cfg.total_iterations();
  const int stop = cfg.max_iterations > 0 ? std::min(cfg.max_iterations, total) : total;
  int iter0 = 0;

  for (int epoch = 0; epoch < cfg.epochs && iter0 < stop; ++epoch) {
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffle, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    EpochSnapshot snap;
    snap.epoch = epoch + 1;

    for (int it = 0; it < cfg.iters_per_epoch && iter0 < stop; ++it, ++iter0) {
      const double scale = lr_scale(cfg, iter0);
      det_opt.lr = cfg.det_lr * scale;
      swn_opt.lr = cfg.swn_lr * scale;

      // Forward every anchor of the batch and build the concatenated match.
      std::vector<std::size_t> scene_ids(static_cast<std::size_t>(cfg.batch_scenes));
      MatchResult m;
      m.assigned_gt.reserve(batch_n);
      for (int b = 0; b < cfg.batch_scenes; ++b) {
        const std::size_t sid = order[static_cast<std::size_t>(it * cfg.batch_scenes + b)];
        scene_ids[static_cast<std::size_t>(b)] = sid;
        const auto& sm = train_match[sid];
        m.assigned_gt.insert(m.assigned_gt.end(), sm.assigned_gt.begin(), sm.assigned_gt.end());
        m.max_iou.insert(m.max_iou.end(), sm.max_iou.begin(), sm.max_iou.end());
        m.label.insert(m.label.end(), sm.label.begin(), sm.label.end());
        m.class_id.insert(m.class_id.end(), sm.class_id.begin(), sm.class_id.end());
      }

      std::vector<MlpForward> cls_fwd(batch_n);
      std::vector<MlpForward> reg_fwd(batch_n);
      std::vector<std::vector<double>> probs(batch_n);
      std::vector<Offset4> preds(batch_n);
      std::vector<Offset4> targets(batch_n);
      std::vector<double> log_sigma(batch_n, 0.0);
      std::vector<double> l_cls(batch_n, 0.0), l_reg(batch_n, 0.0), p_true(batch_n, 0.0);
      std::vector<double> fg_score(batch_n, 0.0);
      std::vector<Box> proposals(batch_n);
      std::vector<bool> flipped(batch_n, false);
      std::vector<SampleRecord> all_records(batch_n);

      for (std::size_t j = 0; j < batch_n; ++j) {
        const std::size_t b = j / n_anchor;
        const std::size_t a = j % n_anchor;
        const Scene& scene = train_set[scene_ids[b]];
        const auto feat = scene.feature(a);
        cls_fwd[j] = mlp_forward(det.cls, feat);
        reg_fwd[j] = mlp_forward(det.reg, feat);
        const auto& r = reg_fwd[j].y;
        preds[j] = {r[0], r[1], r[2], r[3]};
        log_sigma[j] = std::clamp(r[4], -clip, clip);
        probs[j] = tempered_softmax(cls_fwd[j].y, 1.0);
        fg_score[j] = 1.0 - probs[j][0];
        Offset4 safe = preds[j];
        safe.dw = std::clamp(safe.dw, -4.0, 4.0);
        safe.dh = std::clamp(safe.dh, -4.0, 4.0);
        proposals[j] = decode_offsets(anchors.anchors[a], safe);

        SampleRecord& rec = all_records[j];
        rec.index = j;
        rec.label = m.label[j];
        if (m.label[j] == SampleLabel::ignore) continue;
        const int cls = m.class_id[j];
        l_cls[j] = softmax_ce(cls_fwd[j].y, cls);
        p_true[j] = probs[j][static_cast<std::size_t>(cls)];
        rec.l_cls = l_cls[j];
        if (m.is_positive(j)) {
          const auto g = static_cast<std::size_t>(m.assigned_gt[j]);
          const GroundTruth& gt = scene.annotations[g];
          targets[j] = encode_offsets(anchors.anchors[a], gt.box);
          l_reg[j] = l2_regression(preds[j], targets[j]);
          rec.l_reg = l_reg[j];
          rec.iou = iou(proposals[j], gt.box);
          rec.prob = p_true[j];
          flipped[j] = scene.flipped[g];
        }
      }

      // Weight assignment over the labelled anchors.
      const std::uint64_t sample_seed = derive_seed(cfg.seed, kSampling, static_cast<std::uint64_t>(iter0));
      WeightAssignment w;
      std::vector<bool> in_universe(batch_n, false);
      LossNormalization norm;
      double objective = 0.0;
      std::vector<double> d_lcls(batch_n, 0.0), d_lreg(batch_n, 0.0), d_logsig(batch_n, 0.0);
      std::vector<double> raw_w_cls(batch_n, 0.0);

      auto count_norm = [&](const WeightAssignment& wa) {
        LossNormalization nn;
        for (std::size_t j = 0; j < batch_n; ++j) {
          nn.n1 += wa.s_cls[j] > 0.0 ? 1.0 : 0.0;
          nn.n2 += wa.s_reg[j] > 0.0 ? 1.0 : 0.0;
        }
        return nn;
      };

      switch (cfg.strategy) {
        case Strategy::random:
        case Strategy::swn:
          w = random_sampling_weights(m, cfg.sampling, sample_seed);
          break;
        case Strategy::ohem:
          w = ohem_weights(m, l_cls, cfg.sampling);
          break;
        case Strategy::focal:
          w = focal_weights(m, p_true, cfg.sampling);
          break;
        case Strategy::kl: {
          std::vector<double> sigma2(batch_n, 1.0);
          for (std::size_t j = 0; j < batch_n; ++j) sigma2[j] = std::exp(2.0 * log_sigma[j]);
          w = kl_regression_weights(m, sigma2, cfg.sampling, sample_seed);
          break;
        }
        case Strategy::rpn: {
          std::vector<std::size_t> kept;
          for (int b = 0; b < cfg.batch_scenes; ++b) {
            const std::size_t off = static_cast<std::size_t>(b) * n_anchor;
            std::span<const Box> boxes(proposals.data() + off, n_anchor);
            std::span<const double> scores(fg_score.data() + off, n_anchor);
            for (std::size_t k : rpn_nms_keep(boxes, scores, cfg.sampling.nms_thr)) kept.push_back(off + k);
          }
          w = rpn_score_weights(m, fg_score, kept, cfg.sampling);
          break;
        }
      }

      for (std::size_t j = 0; j < batch_n; ++j) {
        in_universe[j] = m.label[j] != SampleLabel::ignore && w.s_cls[j] > 0.0;
      }
      if (cfg.strategy == Strategy::focal) {
        norm.n1 = 0.0;
        norm.n2 = 0.0;
        for (std::size_t j = 0; j < batch_n; ++j) {
          in_universe[j] = m.label[j] != SampleLabel::ignore;
          norm.n2 += m.is_positive(j) ? 1.0 : 0.0;
        }
        // Focal loss is normalized by the number of positives.
        norm.n1 = std::max(norm.n2, 1.0);
      } else if (cfg.strategy == Strategy::kl) {
        norm.n1 = count_norm(w).n1;
        for (std::size_t j = 0; j < batch_n; ++j) norm.n2 += m.is_positive(j) ? 1.0 : 0.0;
      } else {
        norm = count_norm(w);
      }

      std::vector<SampleRecord> records;  // labelled anchors, batch order
      std::vector<std::size_t> record_anchor;
      for (std::size_t j = 0; j < batch_n; ++j) {
        if (m.label[j] == SampleLabel::ignore) continue;
        records.push_back(all_records[j]);
        record_anchor.push_back(j);
      }

      if (cfg.strategy == Strategy::swn) {
        std::vector<SampleRecord> uni;
        std::vector<std::size_t> uni_anchor;
        for (std::size_t j = 0; j < batch_n; ++j) {
          if (in_universe[j]) {
            uni.push_back(all_records[j]);
            uni_anchor.push_back(j);
          }
        }
        auto step = swn_step(swn, uni, cfg.reg, cfg.swn, swn_opt);
        objective = step.loss;
        norm = step.norm;
        std::fill(w.s_cls.begin(), w.s_cls.end(), 0.0);
        std::fill(w.s_reg.begin(), w.s_reg.end(), 0.0);
        for (std::size_t u = 0; u < uni.size(); ++u) {
          const std::size_t j = uni_anchor[u];
          w.s_cls[j] = step.s_cls[u];
          w.s_reg[j] = step.s_reg[u];
          d_lcls[j] = step.d_lcls[u];
          d_lreg[j] = step.d_lreg[u];
          raw_w_cls[j] = step.raw_w_cls[u];
          all_records[j].m_cls = step.m_cls[u];
          all_records[j].m_reg = step.m_reg[u];
        }
      } else {
        WeightAssignment rw;
        for (std::size_t r = 0; r < records.size(); ++r) {
          rw.s_cls.push_back(w.s_cls[record_anchor[r]]);
          rw.s_reg.push_back(w.s_reg[record_anchor[r]]);
        }
        if (cfg.strategy == Strategy::kl) {
          double cls = 0.0;
          double reg = 0.0;
          for (std::size_t j = 0; j < batch_n; ++j) {
            cls += w.s_cls[j] * l_cls[j];
            if (m.is_positive(j)) {
              reg += kl_baseline_loss(preds[j], targets[j], log_sigma[j], cfg.reg.lambda2);
              all_records[j].m_reg = log_sigma[j];
            }
          }
          objective = (norm.n1 > 0 ? cls / norm.n1 : 0.0) + (norm.n2 > 0 ? reg / norm.n2 : 0.0);
        } else {
          objective = unified_loss(records, rw, norm);
        }
        for (std::size_t j = 0; j < batch_n; ++j) {
          if (m.label[j] == SampleLabel::ignore) continue;
          d_lcls[j] = norm.n1 > 0 ? w.s_cls[j] / norm.n1 : 0.0;
          d_lreg[j] = norm.n2 > 0 ? w.s_reg[j] / norm.n2 : 0.0;
          raw_w_cls[j] = w.s_cls[j];
          if (cfg.strategy == Strategy::kl && m.is_positive(j) && norm.n2 > 0) {
            const bool clamped = log_sigma[j] <= -clip || log_sigma[j] >= clip;
            d_logsig[j] = clamped ? 0.0 : (-2.0 * w.s_reg[j] * l_reg[j] + cfg.reg.lambda2) / norm.n2;
          }
        }
      }

      if (observer) {
        WeightAssignment rw;
        for (std::size_t r = 0; r < records.size(); ++r) {
          const std::size_t j = record_anchor[r];
          records[r].s_cls = w.s_cls[j];
          records[r].s_reg = w.s_reg[j];
          records[r].m_cls = all_records[j].m_cls;
          records[r].m_reg = all_records[j].m_reg;
          rw.s_cls.push_back(w.s_cls[j]);
          rw.s_reg.push_back(w.s_reg[j]);
        }
        IterationView view;
        view.iter = iter0 + 1;
        view.strategy = cfg.strategy;
        view.records = records;
        view.weights = &rw;
        view.norm = norm;
        view.objective = objective;
        observer(view);
      }

      if (!std::isfinite(objective)) {
        std::size_t bad = 0;
        for (std::size_t j = 0; j < batch_n; ++j) {
          if (!std::isfinite(l_cls[j]) || !std::isfinite(l_reg[j])) {
            bad = j;
            break;
          }
        }
        throw TrainingDiverged(iter0 + 1, bad);
      }

      // Detector backward: gradients reach the detector only through the
      // weighted loss terms; the weights themselves are constants here.
      MlpGrads g_cls = MlpGrads::zeros_like(det.cls);
      MlpGrads g_reg = MlpGrads::zeros_like(det.reg);
      for (std::size_t j = 0; j < batch_n; ++j) {
        if (d_lcls[j] != 0.0) {
          auto dlog = softmax_ce_grad(cls_fwd[j].y, m.class_id[j]);
          for (double& v : dlog) v *= d_lcls[j];
          mlp_backward(det.cls, cls_fwd[j].tape, dlog, g_cls);
        }
        if ((d_lreg[j] != 0.0 || d_logsig[j] != 0.0) && m.is_positive(j)) {
          const Offset4 gr = l2_regression_grad(preds[j], targets[j]);
          const double dy[5] = {d_lreg[j] * gr.dx, d_lreg[j] * gr.dy, d_lreg[j] * gr.dw,
                                d_lreg[j] * gr.dh, d_logsig[j]};
          mlp_backward(det.reg, reg_fwd[j].tape, dy, g_reg);
        }
      }
      MlpParams* det_nets[2] = {&det.cls, &det.reg};
      const MlpGrads* det_grads[2] = {&g_cls, &g_reg};
      sgd_step(det_opt, det_nets, det_grads);

      IterationRecord rec;
      rec.iter = iter0 + 1;
      rec.epoch = epoch + 1;
      rec.objective = objective;
      rec.lr = det_opt.lr;
      rec.mean_lcls = mean_where(l_cls, batch_n, [&](std::size_t j) { return in_universe[j]; });
      rec.mean_lreg = mean_where(l_reg, batch_n, [&](std::size_t j) { return in_universe[j] && m.is_positive(j); });
      rec.w_cls_pos = mean_where(w.s_cls, batch_n, [&](std::size_t j) { return in_universe[j] && m.is_positive(j); });
      rec.w_cls_neg = mean_where(w.s_cls, batch_n, [&](std::size_t j) { return in_universe[j] && m.is_negative(j); });
      rec.w_reg_pos = mean_where(w.s_reg, batch_n, [&](std::size_t j) { return in_universe[j] && m.is_positive(j); });
      rec.w_cls_all = mean_where(w.s_cls, batch_n, [&](std::size_t j) { return in_universe[j]; });
      rec.raw_w_cls_pos = mean_where(raw_w_cls, batch_n, [&](std::size_t j) { return in_universe[j] && m.is_positive(j); });
      hist.iterations.push_back(rec);

      for (std::size_t j = 0; j < batch_n; ++j) {
        if (!in_universe[j] || !m.is_positive(j)) continue;
        PositiveSample ps;
        ps.rec = all_records[j];
        ps.rec.s_cls = w.s_cls[j];
        ps.rec.s_reg = w.s_reg[j];
        ps.raw_w_cls = raw_w_cls[j];
        ps.label_flipped = flipped[j];
        snap.positives.push_back(ps);
      }
    }

    const bool epoch_done = iter0 == (epoch + 1) * cfg.iters_per_epoch;
    if (cfg.eval_each_epoch && !eval_set.empty() && (epoch_done || iter0 == stop)) {
      snap.eval = evaluate_detector(det, eval_set, anchors);
      snap.evaluated = true;
      auto& last = hist.iterations.back();
      last.map = snap.eval.ap;
      last.has_map = true;
    }
    hist.epochs.push_back(std::move(snap));
  }
  return result;
}

std::vector<ComparisonRow> run_strategy_comparison(const TrainConfig& base,
                                                   std::span<const Strategy> strategies) {
  std::vector<ComparisonRow> rows;
  for (Strategy s : strategies) {
    TrainConfig cfg = base;
    cfg.strategy = s;
    const auto res = train(cfg);
    ComparisonRow row;
    row.strategy = std::string(strategy_name(s));
    const auto& h = res.history;
    const EvalReport* rep = &h.initial_eval;
    for (auto it = h.epochs.rbegin(); it != h.epochs.rend(); ++it) {
      if (it->evaluated) {
        rep = &it->eval;
        break;
      }
    }
    row.map = rep->ap;
    row.ap50 = rep->ap50;
    row.ap75 = rep->ap75;
    double wc = 0.0, wr = 0.0;
    for (const auto& r : h.iterations) {
      wc += r.w_cls_all;
      wr += r.w_reg_pos;
    }
    if (!h.iterations.empty()) {
      wc /= static_cast<double>(h.iterations.size());
      wr /= static_cast<double>(h.iterations.size());
    }
    row.mean_w_cls = wc;
    row.mean_w_reg = wr;
    rows.push_back(row);
  }
  return rows;
}

TrainConfig standard_noisy_benchmark() {
  TrainConfig cfg;
  cfg.scene.canvas = 64.0;
  cfg.scene.box_jitter = 0.05 * cfg.scene.canvas;
  cfg.scene.label_flip = 0.2;
  cfg.scene.seed = 7;
  cfg.seed = 2020;
  cfg.strategy = Strategy::swn;
  return cfg;
}

}  // namespace swnet
