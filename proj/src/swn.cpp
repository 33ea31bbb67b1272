#include "swnet/swn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace swnet {

void SwnConfig::validate() const {
  if (embed_dim == 0) throw std::invalid_argument("swn: embed_dim must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("swn: hidden dims must be >= 1");
  }
  if (!(clip_bound > 0.0)) throw std::invalid_argument("swn: clip_bound must be > 0");
  if (!(init_std >= 0.0)) throw std::invalid_argument("swn: init_std must be >= 0");
}

SwnGrads SwnGrads::zeros_like(const SwnParams& p) {
  SwnGrads g;
  const auto nets = p.nets();
  for (std::size_t k = 0; k < nets.size(); ++k) g.nets[k] = MlpGrads::zeros_like(*nets[k]);
  return g;
}

std::array<const MlpGrads*, 6> SwnGrads::ptrs() const {
  return {&nets[0], &nets[1], &nets[2], &nets[3], &nets[4], &nets[5]};
}

SwnParams init_swn(const SwnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t e = cfg.embed_dim;
  const std::vector<std::size_t> embed_dims{1, e};
  std::vector<std::size_t> head_dims{4 * e};
  head_dims.insert(head_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  head_dims.push_back(1);

  SwnParams p;
  p.f = make_mlp(embed_dims, Activation::relu, Activation::relu);
  p.g = make_mlp(embed_dims, Activation::relu, Activation::relu);
  p.h = make_mlp(embed_dims, Activation::relu, Activation::relu);
  p.k = make_mlp(embed_dims, Activation::relu, Activation::relu);
  p.head_cls = make_mlp(head_dims, Activation::relu, Activation::identity);
  p.head_reg = make_mlp(head_dims, Activation::relu, Activation::identity);
  for (MlpParams* net : p.nets()) init_gaussian(*net, cfg.init_mean, cfg.init_std, rng);
  p.head_cls.layers.back().bias.assign(1, cfg.last_bias_init);
  p.head_reg.layers.back().bias.assign(1, cfg.last_bias_init);
  p.head_cls.touch();
  p.head_reg.touch();
  return p;
}

std::vector<double> flatten(const SwnParams& p) {
  std::vector<double> out;
  for (const MlpParams* net : p.nets()) {
    auto part = flatten(*net);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void unflatten(std::span<const double> flat, SwnParams& p) {
  std::size_t off = 0;
  for (MlpParams* net : p.nets()) {
    const std::size_t n = net->param_count();
    if (off + n > flat.size()) throw std::invalid_argument("unflatten: SWN size mismatch");
    unflatten(flat.subspan(off, n), *net);
    off += n;
  }
  if (off != flat.size()) throw std::invalid_argument("unflatten: SWN size mismatch");
}

std::vector<double> flatten(const SwnGrads& g) {
  std::vector<double> out;
  for (const auto& net : g.nets) {
    auto part = flatten(net);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::array<double, 4> normalize_inputs(double l_cls, double l_reg, double iou, double prob) {
  return {std::log1p(std::max(l_cls, 0.0)), std::log1p(std::max(l_reg, 0.0)), iou, prob};
}

namespace {

void check_finite(double l_cls, double l_reg, double iou, double prob) {
  if (!std::isfinite(l_cls) || !std::isfinite(l_reg) || !std::isfinite(iou) ||
      !std::isfinite(prob)) {
    throw std::invalid_argument("embed_features: non-finite input");
  }
}

struct SampleTapes {
  std::array<MlpTape, 4> embed;
  MlpTape head_cls;
  MlpTape head_reg;
};

std::vector<double> embed_with_tapes(const SwnParams& p, const std::array<double, 4>& x,
                                     std::array<MlpTape, 4>* tapes) {
  const std::array<const MlpParams*, 4> nets{&p.f, &p.g, &p.h, &p.k};
  const std::size_t e = p.embed_dim();
  std::vector<double> d(4 * e);
  for (std::size_t j = 0; j < 4; ++j) {
    const double in[1] = {x[j]};
    std::vector<double> y;
    if (tapes != nullptr) {
      auto fwd = mlp_forward(*nets[j], in);
      y = std::move(fwd.y);
      (*tapes)[j] = std::move(fwd.tape);
    } else {
      y = mlp_predict(*nets[j], in);
    }
    std::copy(y.begin(), y.end(), d.begin() + static_cast<std::ptrdiff_t>(j * e));
  }
  return d;
}

}  // namespace

std::vector<double> embed_features(const SwnParams& p, double l_cls, double l_reg, double iou,
                                   double prob) {
  check_finite(l_cls, l_reg, iou, prob);
  return embed_with_tapes(p, normalize_inputs(l_cls, l_reg, iou, prob), nullptr);
}

SwnPrediction predict_weights(const SwnParams& p, std::span<const double> d, double clip_bound) {
  SwnPrediction out;
  out.raw_cls = mlp_predict(p.head_cls, d)[0];
  out.raw_reg = mlp_predict(p.head_reg, d)[0];
  out.m_cls = std::clamp(out.raw_cls, -clip_bound, clip_bound);
  out.m_reg = std::clamp(out.raw_reg, -clip_bound, clip_bound);
  return out;
}

void smooth_cls_weights(std::span<SampleRecord> batch) {
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (const auto& r : batch) {
    if (r.positive()) {
      pos_sum += r.s_cls;
      ++n_pos;
    } else {
      neg_sum += r.s_cls;
      ++n_neg;
    }
  }
  const double pos_mean = n_pos ? pos_sum / static_cast<double>(n_pos) : 0.0;
  const double neg_mean = n_neg ? neg_sum / static_cast<double>(n_neg) : 0.0;
  for (auto& r : batch) {
    if (r.positive()) {
      if (n_pos > 1) r.s_cls = pos_mean;
    } else if (n_neg > 1) {
      r.s_cls = neg_mean;
    }
  }
}

SwnEvaluation swn_evaluate(const SwnParams& p, std::span<const SampleRecord> batch,
                           const RegularizerConfig& reg, const SwnConfig& cfg, bool with_grads) {
  const std::size_t n = batch.size();
  SwnEvaluation ev;
  ev.m_cls.resize(n);
  ev.m_reg.resize(n);
  ev.raw_w_cls.resize(n);
  ev.s_cls.resize(n);
  ev.s_reg.assign(n, 0.0);
  ev.d_lcls.assign(n, 0.0);
  ev.d_lreg.assign(n, 0.0);
  if (with_grads) ev.grads = SwnGrads::zeros_like(p);

  std::vector<SampleTapes> tapes(with_grads ? n : 0);
  std::vector<bool> cls_clamped(n), reg_clamped(n);
  std::size_t n_pos = 0;
  std::uint64_t pattern = 1469598103934665603ULL;
  auto mix = [&pattern](std::uint64_t v) {
    pattern ^= v;
    pattern *= 1099511628211ULL;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = batch[i];
    const bool pos = r.positive();
    n_pos += pos ? 1 : 0;
    check_finite(r.l_cls, r.l_reg, r.iou, r.prob);
    const auto x = normalize_inputs(r.l_cls, pos ? r.l_reg : 0.0, pos ? r.iou : 0.0,
                                    pos ? r.prob : 0.0);
    double raw_cls = 0.0;
    double raw_reg = 0.0;
    if (with_grads) {
      auto& t = tapes[i];
      const auto d = embed_with_tapes(p, x, &t.embed);
      auto fc = mlp_forward(p.head_cls, d);
      auto fr = mlp_forward(p.head_reg, d);
      raw_cls = fc.y[0];
      raw_reg = fr.y[0];
      t.head_cls = std::move(fc.tape);
      t.head_reg = std::move(fr.tape);
      mix(t.embed[0].activation_pattern(p.f));
      mix(t.embed[1].activation_pattern(p.g));
      mix(t.embed[2].activation_pattern(p.h));
      mix(t.embed[3].activation_pattern(p.k));
      mix(t.head_cls.activation_pattern(p.head_cls));
      mix(t.head_reg.activation_pattern(p.head_reg));
    } else {
      const auto d = embed_with_tapes(p, x, nullptr);
      const auto pr = predict_weights(p, d, cfg.clip_bound);
      raw_cls = pr.raw_cls;
      raw_reg = pr.raw_reg;
    }
    cls_clamped[i] = raw_cls < -cfg.clip_bound || raw_cls > cfg.clip_bound;
    reg_clamped[i] = raw_reg < -cfg.clip_bound || raw_reg > cfg.clip_bound;
    mix(cls_clamped[i] ? 3 : 5);
    mix(pos && reg_clamped[i] ? 7 : 11);
    ev.m_cls[i] = std::clamp(raw_cls, -cfg.clip_bound, cfg.clip_bound);
    ev.m_reg[i] = std::clamp(raw_reg, -cfg.clip_bound, cfg.clip_bound);
    ev.raw_w_cls[i] = std::exp(-2.0 * ev.m_cls[i]);
    if (pos) ev.s_reg[i] = std::exp(-2.0 * ev.m_reg[i]);
  }
  ev.pattern = pattern;

  const double n1 = static_cast<double>(n);
  const double n2 = static_cast<double>(n_pos);
  ev.norm = {n1, n2};

  // Classification weights, optionally replaced by their group means.
  double pos_w = 0.0, neg_w = 0.0, pos_l = 0.0, neg_l = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i].positive()) {
      pos_w += ev.raw_w_cls[i];
      pos_l += batch[i].l_cls;
    } else {
      neg_w += ev.raw_w_cls[i];
      neg_l += batch[i].l_cls;
    }
  }
  const double n_neg = n1 - n2;
  for (std::size_t i = 0; i < n; ++i) {
    if (cfg.smoothing) {
      ev.s_cls[i] = batch[i].positive() ? pos_w / n2 : neg_w / n_neg;
    } else {
      ev.s_cls[i] = ev.raw_w_cls[i];
    }
  }

  double cls_sum = 0.0;
  double reg_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cls_sum += ev.s_cls[i] * batch[i].l_cls + reg.lambda1 * ev.m_cls[i];
    if (batch[i].positive()) {
      reg_sum += ev.s_reg[i] * batch[i].l_reg + reg.lambda2 * ev.m_reg[i];
    }
  }
  ev.loss = (n1 > 0 ? cls_sum / n1 : 0.0) + (n2 > 0 ? reg_sum / n2 : 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    ev.d_lcls[i] = n1 > 0 ? ev.s_cls[i] / n1 : 0.0;
    ev.d_lreg[i] = n2 > 0 ? ev.s_reg[i] / n2 : 0.0;
  }
  if (!with_grads) return ev;

  const std::size_t e = p.embed_dim();
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = batch[i].positive();
    // d/dm_cls of the (possibly smoothed) weighted term plus the regularizer.
    double dm_cls = 0.0;
    if (cfg.smoothing) {
      const double group_l = pos ? pos_l : neg_l;
      const double group_n = pos ? n2 : n_neg;
      dm_cls = (-2.0 * ev.raw_w_cls[i] * group_l / group_n + reg.lambda1) / n1;
    } else {
      dm_cls = (-2.0 * ev.raw_w_cls[i] * batch[i].l_cls + reg.lambda1) / n1;
    }
    double dm_reg = 0.0;
    if (pos) dm_reg = (-2.0 * ev.s_reg[i] * batch[i].l_reg + reg.lambda2) / n2;
    if (cls_clamped[i]) dm_cls = 0.0;
    if (reg_clamped[i]) dm_reg = 0.0;
    if (dm_cls == 0.0 && dm_reg == 0.0) continue;

    auto& t = tapes[i];
    std::vector<double> dd(4 * e, 0.0);
    if (dm_cls != 0.0) {
      const double dy[1] = {dm_cls};
      auto dx = mlp_backward(p.head_cls, t.head_cls, dy, ev.grads.nets[4]);
      for (std::size_t j = 0; j < dd.size(); ++j) dd[j] += dx[j];
    }
    if (dm_reg != 0.0) {
      const double dy[1] = {dm_reg};
      auto dx = mlp_backward(p.head_reg, t.head_reg, dy, ev.grads.nets[5]);
      for (std::size_t j = 0; j < dd.size(); ++j) dd[j] += dx[j];
    }
    const std::array<const MlpParams*, 4> embeds{&p.f, &p.g, &p.h, &p.k};
    for (std::size_t j = 0; j < 4; ++j) {
      std::span<const double> chunk(dd.data() + j * e, e);
      mlp_backward(*embeds[j], t.embed[j], chunk, ev.grads.nets[j]);
    }
  }
  return ev;
}

SwnStepResult swn_step(SwnParams& p, std::span<const SampleRecord> batch,
                       const RegularizerConfig& reg, const SwnConfig& cfg, OptimizerState& opt) {
  auto ev = swn_evaluate(p, batch, reg, cfg, true);
  auto nets = p.nets();
  auto grads = ev.grads.ptrs();
  optimizer_step(opt, nets, grads);
  SwnStepResult r;
  r.loss = ev.loss;
  r.m_cls = std::move(ev.m_cls);
  r.m_reg = std::move(ev.m_reg);
  r.raw_w_cls = std::move(ev.raw_w_cls);
  r.s_cls = std::move(ev.s_cls);
  r.s_reg = std::move(ev.s_reg);
  r.d_lcls = std::move(ev.d_lcls);
  r.d_lreg = std::move(ev.d_lreg);
  r.norm = ev.norm;
  return r;
}

std::vector<NamedMlp> swn_sections(const SwnParams& p) {
  std::vector<NamedMlp> out;
  const auto nets = p.nets();
  for (std::size_t k = 0; k < nets.size(); ++k) out.emplace_back(kSwnSectionNames[k], *nets[k]);
  return out;
}

SwnParams swn_from_sections(std::span<const NamedMlp> sections) {
  SwnParams p;
  auto nets = p.nets();
  std::array<bool, 6> seen{};
  for (const auto& [name, mlp] : sections) {
    bool matched = false;
    for (std::size_t k = 0; k < kSwnSectionNames.size(); ++k) {
      if (name == kSwnSectionNames[k]) {
        *nets[k] = mlp;
        seen[k] = true;
        matched = true;
      }
    }
    if (!matched) throw std::runtime_error("swn checkpoint: unexpected section '" + name + "'");
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw std::runtime_error(std::string("swn checkpoint: missing section ") + kSwnSectionNames[k]);
    }
  }
  return p;
}

}  // namespace swnet
