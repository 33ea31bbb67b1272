// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and frozen
// fixtures live at the top of this file.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../common/oracles.hpp"
#include "swnet/analysis.hpp"
#include "swnet/cli.hpp"
#include "swnet/gradsuite.hpp"
#include "swnet/losses.hpp"
#include "swnet/matching.hpp"
#include "swnet/toydet.hpp"

using namespace swnet;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kFocalTol = 1e-12;
constexpr double kPureGradTol = 1e-6;
constexpr double kPipelineGradTol = 1e-4;
constexpr std::size_t kGradProbes = 100;
constexpr int kSigmaTrials = 50;
constexpr int kSigmaGridPoints = 1000;
constexpr double kSigmaGridLo = 1e-3;
constexpr double kSigmaGridHi = 1e3;
constexpr int kMapInstances = 200;
constexpr double kInitGapLimit = 0.25;
constexpr int kInitK = 500;
constexpr double kFixtureRelTol = 1e-6;

// Runtime budgets in seconds.
constexpr double kBudget1 = 1.0;
constexpr double kBudget2 = 30.0;
constexpr double kBudget3 = 5.0;
constexpr double kBudget4 = 10.0;
constexpr double kBudget5 = 5.0;
constexpr double kBudget6PerRun = 120.0;
constexpr double kBudget7 = 600.0;

// Frozen measurements from the first validated run on the standard noisy
// benchmark. A drift beyond kFixtureRelTol is reported next to the verdict.
struct Fixture {
  const char* name;
  double value;
};
constexpr Fixture kFixtures[] = {
    {"6a.w_cls_first", 0.6940291676},
    {"6a.w_cls_last", 46.77385603},
    {"6a.w_reg_first", 1.09816867},
    {"6a.w_reg_last", 5.355716611},
    {"6b.cls_top_share_epoch1", 3.287422317},
    {"6b.cls_top_share_final", 11.62144257},
    {"6b.reg_top_share_epoch1", 0.5435671245},
    {"6b.reg_top_share_final", 8.05681427},
    {"6c.flipped_weight", 0.0269145207},
    {"6c.clean_weight", 0.03026101638},
    {"7.cls_relative_gap", 2.182143657},
    {"7.reg_relative_gap", 0.1906012274},
    {"8.swn_map", 0},
    {"8.random_map", 0.4555256098},
};

struct Verdict {
  bool pass = false;
  std::vector<std::string> details;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<std::string> g_drift;

void check_fixture(const char* name, double measured, Verdict& v) {
  for (const auto& f : kFixtures) {
    if (std::string(f.name) != name) continue;
    const double scale = std::max(std::abs(f.value), 1e-12);
    if (std::abs(measured - f.value) / scale > kFixtureRelTol) {
      v.details.push_back(std::string("fixture drift ") + name + ": frozen " +
                          fmt("%.10g", f.value) + ", measured " + fmt("%.10g", measured));
      g_drift.push_back(name);
    }
    return;
  }
}

// 1. Equation fidelity.
Verdict criterion1() {
  Stopwatch sw;
  Verdict v;
  Rng rng(101);
  int eq2_mismatch = 0;
  int eq9_mismatch = 0;
  int temp_nonzero = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(128);
    std::vector<SampleRecord> recs(n);
    WeightAssignment w{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    std::vector<std::size_t> a_cls;
    std::vector<std::size_t> a_reg;
    for (std::size_t i = 0; i < n; ++i) {
      recs[i].label = rng.uniform() < 0.3 ? SampleLabel::positive : SampleLabel::negative;
      recs[i].l_cls = 10.0 * rng.uniform();
      recs[i].l_reg = recs[i].positive() ? 5.0 * rng.uniform() : 0.0;
      if (rng.uniform() < 0.6) {
        w.s_cls[i] = 1.0;
        a_cls.push_back(i);
        if (recs[i].positive()) {
          w.s_reg[i] = 1.0;
          a_reg.push_back(i);
        }
      }
    }
    const LossNormalization norm{static_cast<double>(a_cls.size()), static_cast<double>(a_reg.size())};
    if (unified_loss(recs, w, norm) != oracle::subset_loss(recs, a_cls, a_reg)) ++eq2_mismatch;

    for (auto r : recs) {
      r.m_cls = 0.0;
      r.m_reg = 0.0;
      const double plain = r.l_cls + (r.positive() ? r.l_reg : 0.0);
      if (uncertainty_loss(r, {0.5, 0.5}) != plain) ++eq9_mismatch;
    }

    std::vector<double> logits(1 + rng.index(10));
    for (double& z : logits) z = 5.0 * rng.normal();
    if (temperature_approx_error(logits, 1.0) != 0.0) ++temp_nonzero;
  }
  const double t = sw.seconds();
  v.pass = eq2_mismatch == 0 && eq9_mismatch == 0 && temp_nonzero == 0 && t < kBudget1;
  v.details.push_back("1000 random batches: unified-vs-subset mismatches " + std::to_string(eq2_mismatch) +
                      ", m=0 mismatches " + std::to_string(eq9_mismatch) +
                      ", nonzero temperature gaps at sigma=1 " + std::to_string(temp_nonzero));
  v.details.push_back(fmt("runtime %.3f s (budget %.0f s)", t, kBudget1));
  return v;
}

// 2. Gradient suite.
Verdict criterion2() {
  Stopwatch sw;
  Verdict v;
  GradSuiteConfig cfg;
  cfg.probes = kGradProbes;
  cfg.pure_tol = kPureGradTol;
  cfg.pipeline_tol = kPipelineGradTol;
  const auto cases = run_gradcheck_suite(cfg);
  const double t = sw.seconds();
  bool ok = !cases.empty();
  for (const auto& c : cases) {
    ok = ok && c.passed && c.probes >= kGradProbes;
    v.details.push_back(c.name + (c.pipeline ? " (pipeline)" : " (pure)") + ": probes " +
                        std::to_string(c.probes) + ", coords " + std::to_string(c.checked) +
                        ", max rel err " + fmt("%.3g", c.max_rel_err) + fmt(" <= %.0e", c.tol) +
                        (c.passed ? "" : "  FAILED"));
  }
  v.pass = ok && t < kBudget2;
  v.details.push_back(fmt("runtime %.2f s (budget %.0f s)", t, kBudget2));
  return v;
}

// Grid minimizer of L/sigma^2 + lambda2 log sigma over log-spaced sigma.
double grid_argmin_sigma(double l, double lambda2, double& log_step) {
  const double lo = std::log(kSigmaGridLo);
  const double hi = std::log(kSigmaGridHi);
  log_step = (hi - lo) / (kSigmaGridPoints - 1);
  double best = INFINITY;
  double best_sigma = 0.0;
  for (int k = 0; k < kSigmaGridPoints; ++k) {
    const double sigma = std::exp(lo + log_step * k);
    const double val = regression_uncertainty_loss(l, sigma, lambda2);
    if (val < best) {
      best = val;
      best_sigma = sigma;
    }
  }
  return best_sigma;
}

// 3. Optimal-variance oracle, lambda2 = 1, target sqrt(L).
Verdict criterion3() {
  Stopwatch sw;
  Verdict v;
  Rng rng(303);
  int hits_sqrt_l = 0;
  int hits_closed_form = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < kSigmaTrials; ++trial) {
    const double l = 0.01 + (10.0 - 0.01) * (1.0 - rng.uniform());  // (0.01, 10]
    double log_step = 0.0;
    const double s = grid_argmin_sigma(l, 1.0, log_step);
    const double gap_sqrt_l = std::abs(std::log(s / std::sqrt(l)));
    const double gap_closed = std::abs(std::log(s / std::sqrt(optimal_sigma(l, 1.0).sigma2)));
    hits_sqrt_l += gap_sqrt_l <= log_step + 1e-12;
    hits_closed_form += gap_closed <= log_step + 1e-12;
    worst_ratio = std::max(worst_ratio, s / std::sqrt(l));
  }
  const double t = sw.seconds();
  v.pass = hits_sqrt_l == kSigmaTrials && t < kBudget3;
  v.details.push_back("grid argmin within one step of sqrt(L): " + std::to_string(hits_sqrt_l) + "/" +
                      std::to_string(kSigmaTrials));
  v.details.push_back(fmt("largest argmin / sqrt(L) = %.4f (sqrt 2 = %.4f)", worst_ratio, std::sqrt(2.0)));
  v.details.push_back("grid argmin within one step of sqrt(2L/lambda2): " + std::to_string(hits_closed_form) +
                      "/" + std::to_string(kSigmaTrials));
  v.details.push_back(
      "analysis: d/dsigma (L/sigma^2 + lambda2 log sigma) = 0 gives sigma^2 = 2L/lambda2, so with "
      "lambda2 = 1 the minimizer is sqrt(2L); sigma^2 = L needs lambda2 = 2 (a log sigma^2 regularizer)");
  v.details.push_back(fmt("runtime %.3f s (budget %.0f s)", t, kBudget3));
  return v;
}

// 4. mAP oracle equivalence.
Verdict criterion4() {
  Stopwatch sw;
  Verdict v;
  Rng rng(404);
  int mismatches = 0;
  for (int trial = 0; trial < kMapInstances; ++trial) {
    const auto inst = oracle::random_instance(rng, 5, 3);
    if (coco_map(inst.dets, inst.gts).ap != oracle::coco_map(inst.dets, inst.gts)) ++mismatches;
  }
  const std::vector<std::vector<GroundTruth>> gts{{{{0, 0, 10, 10}, 1}}};
  const std::vector<std::vector<Detection>> dets{{{{0, 0, 10, 6}, 1, 0.9}}};
  const double worked = coco_map(dets, gts).ap;
  const double t = sw.seconds();
  v.pass = mismatches == 0 && worked == 0.3 && t < kBudget4;
  v.details.push_back("random instances: " + std::to_string(kMapInstances) + ", mismatches " +
                      std::to_string(mismatches));
  v.details.push_back(fmt("worked example mAP = %.17g (expected exactly 0.3)", worked));
  v.details.push_back(fmt("runtime %.3f s (budget %.0f s)", t, kBudget4));
  return v;
}

MatchResult random_labels(Rng& rng, std::size_t n) {
  MatchResult m;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const auto l = u < 0.25 ? SampleLabel::positive : (u < 0.9 ? SampleLabel::negative : SampleLabel::ignore);
    m.label.push_back(l);
    m.assigned_gt.push_back(l == SampleLabel::positive ? 0 : -1);
    m.max_iou.push_back(l == SampleLabel::positive ? 0.6 : 0.1);
    m.class_id.push_back(l == SampleLabel::positive ? 1 : 0);
  }
  return m;
}

// Greedy class-agnostic NMS written out directly.
std::vector<bool> oracle_nms(const std::vector<Box>& boxes, const std::vector<double>& scores, double thr) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> kept(boxes.size(), false);
  std::vector<std::size_t> chosen;
  for (std::size_t i : order) {
    bool ok = true;
    for (std::size_t c : chosen) ok = ok && oracle::box_iou(boxes[c], boxes[i]) <= thr;
    if (ok) {
      chosen.push_back(i);
      kept[i] = true;
    }
  }
  return kept;
}

// 5. Strategy zoo conformance.
Verdict criterion5() {
  Stopwatch sw;
  Verdict v;
  Rng rng(505);
  int focal_bad = 0, ohem_bad = 0, kl_bad = 0, rpn_bad = 0;
  double focal_worst = 0.0;
  constexpr int kTrials = 300;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 1 + rng.index(80);
    const auto m = random_labels(rng, n);
    StrategyConfig cfg;
    cfg.n_p = static_cast<int>(rng.index(12));
    cfg.n_n = static_cast<int>(rng.index(40));
    cfg.gamma = 3.0 * rng.uniform();
    cfg.rho = rng.uniform();

    // Focal: (1 - p)^gamma on labelled anchors.
    std::vector<double> p(n);
    for (double& x : p) x = rng.uniform();
    const auto fw = focal_weights(m, p, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      const bool labelled = m.label[i] != SampleLabel::ignore;
      const double want = labelled ? std::exp(cfg.gamma * std::log1p(-p[i])) : 0.0;
      const double err = std::abs(fw.s_cls[i] - want);
      focal_worst = std::max(focal_worst, err);
      if (err > kFocalTol) ++focal_bad;
      if (fw.s_reg[i] != (m.label[i] == SampleLabel::positive ? 1.0 : 0.0)) ++focal_bad;
    }

    // OHEM: the k largest losses per group (losses are continuous, so no ties).
    std::vector<double> loss(n);
    for (double& x : loss) x = 5.0 * rng.uniform();
    const auto ow = ohem_weights(m, loss, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      if (m.label[i] == SampleLabel::ignore) {
        if (ow.s_cls[i] != 0.0) ++ohem_bad;
        continue;
      }
      int larger = 0;
      for (std::size_t j = 0; j < n; ++j) larger += m.label[j] == m.label[i] && loss[j] > loss[i];
      const int k = m.label[i] == SampleLabel::positive ? cfg.n_p : cfg.n_n;
      const double want = larger < k ? 1.0 : 0.0;
      if (ow.s_cls[i] != want) ++ohem_bad;
      if (ow.s_reg[i] != (m.label[i] == SampleLabel::positive ? want : 0.0)) ++ohem_bad;
    }

    // KL: 1/sigma^2 on positives.
    std::vector<double> s2(n);
    for (double& x : s2) x = 0.05 + 4.0 * rng.uniform();
    const auto kw = kl_regression_weights(m, s2, cfg, 9);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = m.label[i] == SampleLabel::positive ? 1.0 / s2[i] : 0.0;
      if (kw.s_reg[i] != want) ++kl_bad;
    }

    // RPN: 1[score > rho] * 1[kept by NMS].
    std::vector<Box> boxes(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 20.0 * rng.uniform();
      const double y = 20.0 * rng.uniform();
      boxes[i] = {x, y, x + 2.0 + 6.0 * rng.uniform(), y + 2.0 + 6.0 * rng.uniform()};
      scores[i] = rng.uniform();
    }
    const auto kept_idx = rpn_nms_keep(boxes, scores, cfg.nms_thr);
    const auto kept = oracle_nms(boxes, scores, cfg.nms_thr);
    const auto rw = rpn_score_weights(m, scores, kept_idx, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      const bool labelled = m.label[i] != SampleLabel::ignore;
      const double want = labelled && scores[i] > cfg.rho && kept[i] ? 1.0 : 0.0;
      if (rw.s_cls[i] != want) ++rpn_bad;
      if (rw.s_reg[i] != (m.label[i] == SampleLabel::positive ? want : 0.0)) ++rpn_bad;
    }
  }
  const double t = sw.seconds();
  v.pass = focal_bad == 0 && ohem_bad == 0 && kl_bad == 0 && rpn_bad == 0 && t < kBudget5;
  v.details.push_back(std::to_string(kTrials) + " random batches: focal errors " + std::to_string(focal_bad) +
                      fmt(" (max abs err %.2g)", focal_worst) + ", ohem errors " + std::to_string(ohem_bad) +
                      ", kl errors " + std::to_string(kl_bad) + ", rpn errors " + std::to_string(rpn_bad));
  v.details.push_back(fmt("runtime %.3f s (budget %.0f s)", t, kBudget5));
  return v;
}

double top_share(const std::vector<PositiveSample>& ps, LossKind k) {
  std::vector<SampleRecord> recs;
  for (const auto& p : ps) recs.push_back(p.rec);
  const auto h = loss_distribution_by_iou(recs, k, true, 0.1);
  if (h.empty()) return 0.0;
  return h.percent[3] + h.percent[4];  // [0.8, 0.9) and [0.9, 1.0]
}

// 6. Training-dynamics trends on the standard noisy benchmark.
Verdict criterion6(const TrainResult& run, double seconds) {
  Verdict v;
  const auto& h = run.history;
  std::vector<double> w_cls;
  std::vector<double> w_reg;
  for (const auto& r : h.iterations) {
    w_cls.push_back(r.w_cls_all);
    w_reg.push_back(r.w_reg_pos);
  }
  const double c0 = first_decile_mean(w_cls), c1 = last_decile_mean(w_cls);
  const double r0 = first_decile_mean(w_reg), r1 = last_decile_mean(w_reg);
  const bool a = c1 > c0 && r1 > r0;

  const auto& first = h.epochs.front().positives;
  const auto& last = h.epochs.back().positives;
  const double cls_e1 = top_share(first, LossKind::cls), cls_en = top_share(last, LossKind::cls);
  const double reg_e1 = top_share(first, LossKind::reg), reg_en = top_share(last, LossKind::reg);
  const bool b = cls_en > cls_e1 && reg_en > reg_e1;

  double wf = 0.0, wc = 0.0;
  int nf = 0, nc = 0;
  for (const auto& p : last) {
    if (p.label_flipped) {
      wf += p.raw_w_cls;
      ++nf;
    } else {
      wc += p.raw_w_cls;
      ++nc;
    }
  }
  const double flipped = nf ? wf / nf : NAN;
  const double clean = nc ? wc / nc : NAN;
  const bool c = nf > 0 && nc > 0 && flipped < clean;

  v.pass = a && b && c && seconds < kBudget6PerRun;
  v.details.push_back(std::string("(a) ") + (a ? "holds" : "fails") +
                      fmt(": mean classification weight first decile %.4g, last decile %.4g", c0, c1) +
                      fmt("; positive regression weight %.4g -> %.4g", r0, r1));
  v.details.push_back(std::string("(b) ") + (b ? "holds" : "fails") +
                      fmt(": weighted cls loss share in IoU [0.8, 1.0] epoch 1 %.3f%%, final %.3f%%", cls_e1, cls_en) +
                      fmt("; reg %.3f%% -> %.3f%%", reg_e1, reg_en));
  v.details.push_back(std::string("(c) ") + (c ? "holds" : "fails") +
                      fmt(": final-epoch mean learned cls weight, flipped %.4g vs clean %.4g", flipped, clean) +
                      " (" + std::to_string(nf) + " flipped, " + std::to_string(nc) + " clean positives)");
  v.details.push_back(fmt("run time %.1f s (budget %.0f s)", seconds, kBudget6PerRun));
  check_fixture("6a.w_cls_first", c0, v);
  check_fixture("6a.w_cls_last", c1, v);
  check_fixture("6a.w_reg_first", r0, v);
  check_fixture("6a.w_reg_last", r1, v);
  check_fixture("6b.cls_top_share_epoch1", cls_e1, v);
  check_fixture("6b.cls_top_share_final", cls_en, v);
  check_fixture("6b.reg_top_share_epoch1", reg_e1, v);
  check_fixture("6b.reg_top_share_final", reg_en, v);
  check_fixture("6c.flipped_weight", flipped, v);
  check_fixture("6c.clean_weight", clean, v);
  return v;
}

// 7. Initialization robustness.
Verdict criterion7(std::size_t jobs) {
  Stopwatch sw;
  Verdict v;
  const std::vector<double> biases{-1.0, -0.5, 0.0, 0.5, 1.0};
  const auto r = init_sensitivity(standard_noisy_benchmark(), biases, kInitK, 50, jobs);
  const double t = sw.seconds();
  const double cg = r.cls_relative_gap();
  const double rg = r.reg_relative_gap();
  v.pass = cg < kInitGapLimit && rg < kInitGapLimit && t < kBudget7;
  std::string ends = "smoothed traces at k = " + std::to_string(kInitK) + ": cls";
  for (const auto& tr : r.cls_traces) ends += fmt(" %.4g", tr.back());
  ends += "; reg";
  for (const auto& tr : r.reg_traces) ends += fmt(" %.4g", tr.back());
  v.details.push_back(ends);
  v.details.push_back(fmt("cls max gap %.4g / mean %.4g = %.4g", r.cls_gap, r.cls_mean, cg) +
                      fmt(" (limit %.2f)", kInitGapLimit));
  v.details.push_back(fmt("reg max gap %.4g / mean %.4g = %.4g", r.reg_gap, r.reg_mean, rg) +
                      fmt(" (limit %.2f)", kInitGapLimit));
  v.details.push_back(fmt("runtime %.1f s (budget %.0f s)", t, kBudget7));
  check_fixture("7.cls_relative_gap", cg, v);
  check_fixture("7.reg_relative_gap", rg, v);
  return v;
}

// 8. Comparative benefit: swn final mAP >= uniform-weighting baseline.
Verdict criterion8(const TrainResult& swn_run, const TrainResult& random_run) {
  Verdict v;
  const double s = swn_run.history.final_map();
  const double r = random_run.history.final_map();
  v.pass = s >= r;
  v.details.push_back(fmt("final held-out mAP: swn %.4f, random %.4f, gap %+.4f", s, r, s - r));
  const auto& it = swn_run.history.iterations;
  if (!it.empty()) {
    v.details.push_back(fmt("swn final-iteration weights: cls pos %.4g, cls neg %.4g, reg pos %.4g",
                            it.back().w_cls_pos, it.back().w_cls_neg, it.back().w_reg_pos));
  }
  check_fixture("8.swn_map", s, v);
  check_fixture("8.random_map", r, v);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 9. Determinism: every command re-run from its manifest reproduces its CSVs.
Verdict criterion9() {
  Stopwatch sw;
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "swnet_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> small{"--set",
                                       "scene.grid=4",
                                       "train.epochs=2",
                                       "train.iters_per_epoch=4",
                                       "train.eval_scenes=4",
                                       "analysis.smoothing_width=3",
                                       "analysis.sweep_lambdas=[0.3,0.7]",
                                       "analysis.sensitivity_biases=[-1,1]",
                                       "analysis.sensitivity_k=6",
                                       "analysis.compare_strategies=[\"random\",\"swn\"]",
                                       "gradcheck.probes=3"};
  const std::vector<std::string> commands{"train", "compare", "analyze", "sweep", "sensitivity", "gradcheck"};
  bool ok = true;
  for (const auto& cmd : commands) {
    const fs::path a = root / (cmd + "_a");
    const fs::path b = root / (cmd + "_b");
    std::ostringstream out, err;
    std::vector<std::string> args{"--out", a.string(), cmd};
    args.insert(args.end(), small.begin(), small.end());
    const int code_a = cli::run(args, out, err);
    const int code_b =
        cli::run({"--config", (a / "run.json").string(), "--out", b.string(), cmd}, out, err);
    int csvs = 0, differ = 0;
    if (code_a == 0 && code_b == 0) {
      const auto ma = nlohmann::json::parse(slurp(a / "run.json"));
      const auto mb = nlohmann::json::parse(slurp(b / "run.json"));
      if (ma["outputs"] != mb["outputs"] || ma["config_hash"] != mb["config_hash"]) ++differ;
      for (const auto& o : ma["outputs"]) {
        const std::string f = o;
        if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
        ++csvs;
        if (slurp(a / f) != slurp(b / f)) ++differ;
      }
    }
    const bool this_ok = code_a == 0 && code_b == 0 && csvs > 0 && differ == 0;
    ok = ok && this_ok;
    v.details.push_back(cmd + ": exit " + std::to_string(code_a) + "/" + std::to_string(code_b) + ", " +
                        std::to_string(csvs) + " CSVs compared, " + std::to_string(differ) + " differ" +
                        (this_ok ? "" : "  " + err.str()));
  }
  fs::remove_all(root);
  v.pass = ok;
  v.details.push_back(fmt("runtime %.1f s", sw.seconds()));
  return v;
}

void report(int id, const char* title, const Verdict& v) {
  std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", title);
  for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t jobs = 1;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--jobs") jobs = static_cast<std::size_t>(std::stoul(argv[i + 1]));
  }
  std::vector<bool> results;
  auto record = [&](int id, const char* title, const Verdict& v) {
    report(id, title, v);
    results.push_back(v.pass);
  };

  record(1, "equation fidelity", criterion1());
  record(2, "gradient suite", criterion2());
  record(3, "optimal-variance oracle (lambda2 = 1, target sqrt(L))", criterion3());
  record(4, "mAP oracle equivalence", criterion4());
  record(5, "strategy zoo conformance", criterion5());

  TrainConfig bench = standard_noisy_benchmark();
  Stopwatch sw_swn;
  const auto swn_run = train(bench);
  const double swn_seconds = sw_swn.seconds();
  bench.strategy = Strategy::random;
  const auto random_run = train(bench);

  record(6, "training-dynamics trends (standard noisy benchmark, swn)", criterion6(swn_run, swn_seconds));
  record(7, "initialization robustness (last-layer bias sweep)", criterion7(jobs));
  record(8, "comparative benefit (swn mAP >= random sampling mAP)", criterion8(swn_run, random_run));
  record(9, "determinism (manifest re-runs are bit-for-bit)", criterion9());

  const auto passed = std::count(results.begin(), results.end(), true);
  std::printf("summary: %ld/%zu criteria pass", static_cast<long>(passed), results.size());
  if (!g_drift.empty()) std::printf(", %zu fixture drift(s)", g_drift.size());
  std::printf("\n");
  return passed == static_cast<long>(results.size()) ? 0 : 1;
}
