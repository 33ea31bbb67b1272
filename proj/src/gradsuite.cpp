#include "swnet/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swnet/losses.hpp"
#include "swnet/swn.hpp"
#include "swnet/toydet.hpp"

namespace swnet {

namespace {

using Objective = std::function<Probe(std::span<const double>)>;

// Checks a random subset of coordinates by restricting f to them.
GradcheckReport check_subset(const Objective& f, std::span<const double> x,
                             std::span<const double> analytic, std::size_t max_coords, Rng& rng,
                             const GradcheckOptions& opts) {
  if (x.size() <= max_coords) return gradcheck(f, x, analytic, opts);
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < max_coords; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  idx.resize(max_coords);
  std::vector<double> full(x.begin(), x.end());
  std::vector<double> sub(max_coords), sub_grad(max_coords);
  for (std::size_t i = 0; i < max_coords; ++i) {
    sub[i] = x[idx[i]];
    sub_grad[i] = analytic[idx[i]];
  }
  auto g = [&](std::span<const double> s) {
    std::vector<double> y = full;
    for (std::size_t i = 0; i < s.size(); ++i) y[idx[i]] = s[i];
    return f(y);
  };
  return gradcheck(g, sub, sub_grad, opts);
}

struct Accumulator {
  GradCaseResult res;
  void add(const GradcheckReport& r) {
    ++res.probes;
    res.checked += r.checked;
    res.excluded += r.excluded;
    res.max_rel_err = std::max(res.max_rel_err, r.max_rel_err);
  }
  GradCaseResult finish() {
    res.passed = res.checked > 0 && res.max_rel_err <= res.tol;
    return res;
  }
};

SampleRecord random_record(Rng& rng, bool positive) {
  SampleRecord r;
  r.label = positive ? SampleLabel::positive : SampleLabel::negative;
  r.l_cls = rng.uniform(0.01, 3.0);
  r.l_reg = positive ? rng.uniform(0.01, 2.0) : 0.0;
  r.iou = positive ? rng.uniform(0.5, 1.0) : 0.0;
  r.prob = positive ? rng.uniform(0.0, 1.0) : 0.0;
  r.m_cls = rng.uniform(-1.9, 1.9);
  r.m_reg = rng.uniform(-1.9, 1.9);
  return r;
}

void perturb(MlpParams& p, double std, Rng& rng) {
  for (auto& l : p.layers) {
    for (double& w : l.weight) w = rng.normal(0.0, std);
    for (double& b : l.bias) b = rng.normal(0.0, std);
  }
  p.touch();
}

Probe mlp_probe(const MlpParams& p, std::span<const double> x, std::span<const double> c) {
  const auto fwd = mlp_forward(p, x);
  return {std::inner_product(c.begin(), c.end(), fwd.y.begin(), 0.0), fwd.tape.activation_pattern(p)};
}

}  // namespace

std::vector<GradCaseResult> run_gradcheck_suite(const GradSuiteConfig& cfg) {
  std::vector<GradCaseResult> out;
  auto start = [&](const char* name, bool pipeline) {
    Accumulator a;
    a.res.name = name;
    a.res.pipeline = pipeline;
    a.res.tol = pipeline ? cfg.pipeline_tol : cfg.pure_tol;
    return a;
  };
  auto opts_for = [&](bool pipeline) {
    GradcheckOptions o;
    o.tol = pipeline ? cfg.pipeline_tol : cfg.pure_tol;
    return o;
  };

  {
    auto acc = start("softmax_ce", false);
    Rng rng(derive_seed(cfg.seed, 1));
    for (std::size_t p = 0; p < cfg.probes; ++p) {
      std::vector<double> z(4);
      for (double& v : z) v = rng.normal(0.0, 2.0);
      const int label = static_cast<int>(rng.index(4));
      auto f = [label](std::span<const double> x) { return Probe{softmax_ce(x, label), 0}; };
      acc.add(gradcheck(f, z, softmax_ce_grad(z, label), opts_for(false)));
    }
    out.push_back(acc.finish());
  }
  {
    auto acc = start("l2_regression", false);
    Rng rng(derive_seed(cfg.seed, 2));
    for (std::size_t p = 0; p < cfg.probes; ++p) {
      const Offset4 t{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      const std::vector<double> x{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      auto f = [t](std::span<const double> v) {
        return Probe{l2_regression({v[0], v[1], v[2], v[3]}, t), 0};
      };
      const Offset4 g = l2_regression_grad({x[0], x[1], x[2], x[3]}, t);
      const std::vector<double> ga{g.dx, g.dy, g.dw, g.dh};
      acc.add(gradcheck(f, x, ga, opts_for(false)));
    }
    out.push_back(acc.finish());
  }
  {
    auto acc = start("uncertainty_loss", false);
    Rng rng(derive_seed(cfg.seed, 3));
    RegularizerConfig reg;
    for (std::size_t p = 0; p < cfg.probes; ++p) {
      reg.lambda1 = rng.uniform(0.1, 1.0);
      reg.lambda2 = rng.uniform(0.1, 1.0);
      const SampleRecord base = random_record(rng, rng.bernoulli(0.5));
      const std::vector<double> x{base.l_cls, base.positive() ? base.l_reg : 0.5, base.m_cls, base.m_reg};
      auto f = [&](std::span<const double> v) {
        SampleRecord r = base;
        r.l_cls = v[0];
        r.l_reg = v[1];
        r.m_cls = v[2];
        r.m_reg = v[3];
        return Probe{uncertainty_loss(r, reg), 0};
      };
      SampleRecord r = base;
      r.l_reg = x[1];
      const auto g = uncertainty_loss_grad(r, reg);
      const std::vector<double> ga{g.d_lcls, g.d_lreg, g.d_mcls, g.d_mreg};
      acc.add(gradcheck(f, x, ga, opts_for(false)));
    }
    out.push_back(acc.finish());
  }
  {
    auto acc_x = start("mlp_input", false);
    auto acc_p = start("mlp_params", false);
    Rng rng(derive_seed(cfg.seed, 4));
    const std::vector<std::size_t> dims{5, 8, 8, 3};
    for (std::size_t p = 0; p < cfg.probes; ++p) {
      MlpParams net = make_mlp(dims, Activation::relu, Activation::identity);
      perturb(net, 0.7, rng);
      std::vector<double> x(5), c(3);
      for (double& v : x) v = rng.normal();
      for (double& v : c) v = rng.normal();
      const auto fwd = mlp_forward(net, x);
      MlpGrads grads = MlpGrads::zeros_like(net);
      const auto dx = mlp_backward(net, fwd.tape, c, grads);

      auto fx = [&](std::span<const double> v) { return mlp_probe(net, v, c); };
      acc_x.add(gradcheck(fx, x, dx, opts_for(false)));

      const auto theta = flatten(net);
      auto fp = [&](std::span<const double> v) {
        MlpParams q = net;
        unflatten(v, q);
        return mlp_probe(q, x, c);
      };
      acc_p.add(check_subset(fp, theta, flatten(grads), cfg.coords_per_probe, rng, opts_for(false)));
    }
    out.push_back(acc_x.finish());
    out.push_back(acc_p.finish());
  }
  for (bool smoothing : {true, false}) {
    auto acc = start(smoothing ? "swn_objective" : "swn_objective_unsmoothed", true);
    Rng rng(derive_seed(cfg.seed, smoothing ? 5 : 6));
    SwnConfig sc;
    sc.smoothing = smoothing;
    sc.embed_dim = 4;
    sc.hidden = {8};
    RegularizerConfig reg{0.5, 0.5};
    for (std::size_t p = 0; p < cfg.probes; ++p) {
      SwnParams net = init_swn(sc, rng.next_u64());
      for (MlpParams* m : net.nets()) perturb(*m, 0.8, rng);
      std::vector<SampleRecord> batch;
      const std::size_t n = 2 + rng.index(7);
      for (std::size_t i = 0; i < n; ++i) batch.push_back(random_record(rng, i == 0 || rng.bernoulli(0.4)));
      const auto ev = swn_evaluate(net, batch, reg, sc, true);
      auto f = [&](std::span<const double> v) {
        SwnParams q = net;
        unflatten(v, q);
        const auto e = swn_evaluate(q, batch, reg, sc, false);
        return Probe{e.loss, e.pattern};
      };
      acc.add(check_subset(f, flatten(net), flatten(ev.grads), cfg.coords_per_probe, rng, opts_for(true)));
    }
    out.push_back(acc.finish());
  }
  {
    // Features -> detector heads -> CE and L2 -> fixed per-sample weights.
    auto acc = start("detector_objective", true);
    Rng rng(derive_seed(cfg.seed, 7));
    SceneConfig scene;
    scene.feature_dim = 8;
    const std::size_t classes = static_cast<std::size_t>(scene.num_classes) + 1;
    for (std::size_t p = 0; p < cfg.probes; ++p) {
      DetectorParams det = init_detector(scene, 6, rng.next_u64());
      const std::size_t n = 3 + rng.index(4);
      std::vector<std::vector<double>> feats(n, std::vector<double>(8));
      std::vector<int> labels(n);
      std::vector<Offset4> targets(n);
      std::vector<double> wc(n), wr(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (double& v : feats[i]) v = rng.normal();
        labels[i] = static_cast<int>(rng.index(classes));
        targets[i] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        wc[i] = rng.uniform(0.0, 2.0);
        wr[i] = labels[i] > 0 ? rng.uniform(0.0, 2.0) : 0.0;
      }
      auto objective = [&](const DetectorParams& d, MlpGrads* gc, MlpGrads* gr) {
        double total = 0.0;
        std::uint64_t pattern = 1469598103934665603ULL;
        for (std::size_t i = 0; i < n; ++i) {
          const auto fc = mlp_forward(d.cls, feats[i]);
          const auto fr = mlp_forward(d.reg, feats[i]);
          const Offset4 pred{fr.y[0], fr.y[1], fr.y[2], fr.y[3]};
          total += wc[i] * softmax_ce(fc.y, labels[i]) + wr[i] * l2_regression(pred, targets[i]);
          pattern = (pattern ^ fc.tape.activation_pattern(d.cls)) * 1099511628211ULL;
          pattern = (pattern ^ fr.tape.activation_pattern(d.reg)) * 1099511628211ULL;
          if (gc) {
            auto dz = softmax_ce_grad(fc.y, labels[i]);
            for (double& v : dz) v *= wc[i];
            mlp_backward(d.cls, fc.tape, dz, *gc);
            const Offset4 g = l2_regression_grad(pred, targets[i]);
            const double dy[5] = {wr[i] * g.dx, wr[i] * g.dy, wr[i] * g.dw, wr[i] * g.dh, 0.0};
            mlp_backward(d.reg, fr.tape, dy, *gr);
          }
        }
        return Probe{total, pattern};
      };
      MlpGrads gc = MlpGrads::zeros_like(det.cls);
      MlpGrads gr = MlpGrads::zeros_like(det.reg);
      objective(det, &gc, &gr);
      std::vector<double> theta = flatten(det.cls);
      const auto theta_r = flatten(det.reg);
      const std::size_t split = theta.size();
      theta.insert(theta.end(), theta_r.begin(), theta_r.end());
      std::vector<double> grad = flatten(gc);
      const auto grad_r = flatten(gr);
      grad.insert(grad.end(), grad_r.begin(), grad_r.end());
      auto f = [&](std::span<const double> v) {
        DetectorParams q = det;
        unflatten(v.first(split), q.cls);
        unflatten(v.subspan(split), q.reg);
        return objective(q, nullptr, nullptr);
      };
      acc.add(check_subset(f, theta, grad, cfg.coords_per_probe, rng, opts_for(true)));
    }
    out.push_back(acc.finish());
  }
  return out;
}

}  // namespace swnet
