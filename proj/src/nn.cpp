#include "swnet/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace swnet {

namespace {

std::atomic<std::uint64_t> g_version{1};

std::uint64_t fresh_version() { return g_version.fetch_add(1, std::memory_order_relaxed); }

const char* activation_tag(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::runtime_error("checkpoint: unknown activation '" + s + "'");
}

}  // namespace

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::touch() { version = fresh_version(); }

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.layers.reserve(p.layers.size());
  for (const auto& l : p.layers) {
    g.layers.push_back({std::vector<double>(l.weight.size(), 0.0),
                        std::vector<double>(l.bias.size(), 0.0)});
  }
  return g;
}

void MlpGrads::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  if (other.layers.size() != layers.size()) throw std::invalid_argument("MlpGrads: shape mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.weight.size() != b.weight.size() || a.bias.size() != b.bias.size()) {
      throw std::invalid_argument("MlpGrads: shape mismatch");
    }
    for (std::size_t i = 0; i < a.weight.size(); ++i) a.weight[i] += b.weight[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
  }
  return *this;
}

std::uint64_t MlpTape::activation_pattern(const MlpParams& p) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t k = 0; k < pre.size() && k < p.layers.size(); ++k) {
    if (p.layers[k].act != Activation::relu) continue;
    for (double z : pre[k]) {
      h ^= z > 0.0 ? 1u : 0u;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation head) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    if (dims[k] == 0 || dims[k + 1] == 0) throw std::invalid_argument("make_mlp: zero dimension");
    DenseParams l;
    l.in = dims[k];
    l.out = dims[k + 1];
    l.weight.assign(l.in * l.out, 0.0);
    l.bias.assign(l.out, 0.0);
    l.act = (k + 2 == dims.size()) ? head : hidden;
    p.layers.push_back(std::move(l));
  }
  p.touch();
  return p;
}

namespace {

void dense_apply(const DenseParams& l, std::span<const double> x, std::vector<double>& pre,
                 std::vector<double>& y) {
  pre.resize(l.out);
  y.resize(l.out);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* row = l.weight.data() + o * l.in;
    double z = l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) z += row[i] * x[i];
    pre[o] = z;
    y[o] = (l.act == Activation::relu && z <= 0.0) ? 0.0 : z;
  }
}

void check_input(const MlpParams& p, std::span<const double> x) {
  if (p.layers.empty()) throw std::invalid_argument("mlp_forward: empty network");
  if (x.size() != p.in_dim()) throw std::invalid_argument("mlp_forward: input dimension mismatch");
}

}  // namespace

MlpForward mlp_forward(const MlpParams& p, std::span<const double> x) {
  check_input(p, x);
  MlpForward f;
  f.tape.version = p.version;
  f.tape.inputs.resize(p.layers.size());
  f.tape.pre.resize(p.layers.size());
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    f.tape.inputs[k] = cur;
    dense_apply(p.layers[k], cur, f.tape.pre[k], next);
    std::swap(cur, next);
  }
  f.y = std::move(cur);
  return f;
}

std::vector<double> mlp_predict(const MlpParams& p, std::span<const double> x) {
  check_input(p, x);
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> pre;
  std::vector<double> next;
  for (const auto& l : p.layers) {
    dense_apply(l, cur, pre, next);
    std::swap(cur, next);
  }
  return cur;
}

std::vector<double> mlp_backward(const MlpParams& p, const MlpTape& tape,
                                 std::span<const double> dy, MlpGrads& acc) {
  if (tape.version != p.version || tape.pre.size() != p.layers.size()) {
    throw std::logic_error("mlp_backward: tape does not belong to these parameters");
  }
  if (dy.size() != p.out_dim()) throw std::invalid_argument("mlp_backward: output grad mismatch");
  if (acc.layers.size() != p.layers.size()) throw std::invalid_argument("mlp_backward: grads shape");

  std::vector<double> delta(dy.begin(), dy.end());
  for (std::size_t k = p.layers.size(); k-- > 0;) {
    const auto& l = p.layers[k];
    auto& g = acc.layers[k];
    const auto& x = tape.inputs[k];
    if (l.act == Activation::relu) {
      for (std::size_t o = 0; o < l.out; ++o) {
        if (tape.pre[k][o] <= 0.0) delta[o] = 0.0;
      }
    }
    std::vector<double> dx(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      g.bias[o] += d;
      double* grow = g.weight.data() + o * l.in;
      const double* wrow = l.weight.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        grow[i] += d * x[i];
        dx[i] += d * wrow[i];
      }
    }
    delta = std::move(dx);
  }
  return delta;
}

MlpBackward mlp_backward(const MlpParams& p, const MlpTape& tape, std::span<const double> dy) {
  MlpBackward b;
  b.grads = MlpGrads::zeros_like(p);
  b.dx = mlp_backward(p, tape, dy, b.grads);
  return b;
}

DenseParams init_gaussian(std::size_t in, std::size_t out, double mean, double std, Rng& rng,
                          Activation act) {
  if (!(std >= 0.0)) throw std::invalid_argument("init_gaussian: std must be >= 0");
  DenseParams l;
  l.in = in;
  l.out = out;
  l.act = act;
  l.weight.resize(in * out);
  l.bias.resize(out);
  for (double& w : l.weight) w = rng.normal(mean, std);
  for (double& b : l.bias) b = rng.normal(mean, std);
  return l;
}

DenseParams init_gaussian(std::size_t in, std::size_t out, double mean, double std,
                          std::uint64_t seed, Activation act) {
  Rng rng(seed);
  return init_gaussian(in, out, mean, std, rng, act);
}

void init_gaussian(MlpParams& p, double mean, double std, Rng& rng) {
  for (auto& l : p.layers) l = init_gaussian(l.in, l.out, mean, std, rng, l.act);
  p.touch();
}

std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> out;
  out.reserve(p.param_count());
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weight.begin(), l.weight.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

std::vector<double> flatten(const MlpGrads& g) {
  std::vector<double> out;
  for (const auto& l : g.layers) {
    out.insert(out.end(), l.weight.begin(), l.weight.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void unflatten(std::span<const double> flat, MlpParams& p) {
  if (flat.size() != p.param_count()) throw std::invalid_argument("unflatten: size mismatch");
  std::size_t k = 0;
  for (auto& l : p.layers) {
    for (double& w : l.weight) w = flat[k++];
    for (double& b : l.bias) b = flat[k++];
  }
  p.touch();
}

OptimizerState OptimizerState::sgd(double lr, double momentum, double weight_decay) {
  OptimizerState s;
  s.kind = OptimizerKind::sgd;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

OptimizerState OptimizerState::adam(double lr, double weight_decay) {
  OptimizerState s;
  s.kind = OptimizerKind::adam;
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

namespace {

std::size_t total_params(std::span<MlpParams* const> params,
                         std::span<const MlpGrads* const> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer: params/grads count");
  std::size_t n = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = *params[k];
    const auto& g = *grads[k];
    if (g.layers.size() != p.layers.size()) throw std::invalid_argument("optimizer: grads shape");
    for (std::size_t j = 0; j < p.layers.size(); ++j) {
      if (g.layers[j].weight.size() != p.layers[j].weight.size() ||
          g.layers[j].bias.size() != p.layers[j].bias.size()) {
        throw std::invalid_argument("optimizer: grads shape");
      }
    }
    n += p.param_count();
  }
  return n;
}

// Visits every (param, grad, flat index) triple in a fixed order.
template <class Fn>
void for_each_param(std::span<MlpParams* const> params, std::span<const MlpGrads* const> grads,
                    Fn&& fn) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = *grads[k];
    for (std::size_t j = 0; j < p.layers.size(); ++j) {
      auto& l = p.layers[j];
      for (std::size_t i = 0; i < l.weight.size(); ++i) fn(l.weight[i], g.layers[j].weight[i], idx++);
      for (std::size_t i = 0; i < l.bias.size(); ++i) fn(l.bias[i], g.layers[j].bias[i], idx++);
    }
    p.touch();
  }
}

void ensure_buffers(OptimizerState& s, std::size_t n) {
  if (s.m.empty()) s.m.assign(n, 0.0);
  if (s.kind == OptimizerKind::adam && s.v.empty()) s.v.assign(n, 0.0);
  if (s.m.size() != n || (s.kind == OptimizerKind::adam && s.v.size() != n)) {
    throw std::invalid_argument("optimizer: buffer shape does not match parameters");
  }
}

}  // namespace

void sgd_step(OptimizerState& s, std::span<MlpParams* const> params,
              std::span<const MlpGrads* const> grads) {
  const std::size_t n = total_params(params, grads);
  ensure_buffers(s, n);
  ++s.step;
  for_each_param(params, grads, [&](double& w, double g, std::size_t i) {
    g += s.weight_decay * w;
    if (s.momentum != 0.0) {
      s.m[i] = s.momentum * s.m[i] + g;
      g = s.m[i];
    }
    w -= s.lr * g;
  });
}

void adam_step(OptimizerState& s, std::span<MlpParams* const> params,
               std::span<const MlpGrads* const> grads) {
  const std::size_t n = total_params(params, grads);
  ensure_buffers(s, n);
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for_each_param(params, grads, [&](double& w, double g, std::size_t i) {
    g += s.weight_decay * w;
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    w -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  });
}

void optimizer_step(OptimizerState& s, std::span<MlpParams* const> params,
                    std::span<const MlpGrads* const> grads) {
  if (s.kind == OptimizerKind::adam) {
    adam_step(s, params, grads);
  } else {
    sgd_step(s, params, grads);
  }
}

GradcheckReport gradcheck(const std::function<Probe(std::span<const double>)>& f,
                          std::span<const double> x, std::span<const double> analytic,
                          const GradcheckOptions& opts) {
  if (x.size() != analytic.size()) throw std::invalid_argument("gradcheck: size mismatch");
  GradcheckReport r;
  std::vector<double> probe(x.begin(), x.end());
  const std::uint64_t base_pattern = f(probe).pattern;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + opts.h;
    const Probe up = f(probe);
    probe[i] = x[i] - opts.h;
    const Probe down = f(probe);
    probe[i] = x[i];
    if (up.pattern != base_pattern || down.pattern != base_pattern) {
      ++r.excluded;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * opts.h);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
    const double err = std::abs(a - numeric) / denom;
    ++r.checked;
    if (r.checked == 1 || err > r.max_rel_err) {
      r.max_rel_err = err;
      r.worst_index = i;
      r.worst_analytic = a;
      r.worst_numeric = numeric;
    }
  }
  r.passed = r.max_rel_err <= opts.tol;
  return r;
}

void write_checkpoint(std::ostream& os, std::span<const NamedMlp> sections) {
  const auto prec = os.precision();
  os << std::setprecision(9);
  os << "swnet-checkpoint 1\n";
  os << "sections " << sections.size() << '\n';
  for (const auto& [name, p] : sections) {
    os << "section " << name << ' ' << p.layers.size() << '\n';
    for (const auto& l : p.layers) {
      os << "dense " << l.out << ' ' << l.in << ' ' << activation_tag(l.act) << '\n';
      for (std::size_t o = 0; o < l.out; ++o) {
        for (std::size_t i = 0; i < l.in; ++i) os << (i ? " " : "") << l.w(o, i);
        os << '\n';
      }
      for (std::size_t o = 0; o < l.out; ++o) os << (o ? " " : "") << l.bias[o];
      os << '\n';
    }
  }
  os.precision(prec);
}

std::vector<NamedMlp> read_checkpoint(std::istream& is) {
  auto expect = [&](const std::string& want) {
    std::string tok;
    if (!(is >> tok) || tok != want) {
      throw std::runtime_error("checkpoint: expected '" + want + "', got '" + tok + "'");
    }
  };
  expect("swnet-checkpoint");
  int version = 0;
  if (!(is >> version) || version != 1) throw std::runtime_error("checkpoint: unsupported version");
  expect("sections");
  std::size_t n_sections = 0;
  is >> n_sections;
  std::vector<NamedMlp> out;
  for (std::size_t s = 0; s < n_sections; ++s) {
    expect("section");
    NamedMlp sec;
    std::size_t n_layers = 0;
    if (!(is >> sec.first >> n_layers)) throw std::runtime_error("checkpoint: bad section header");
    for (std::size_t k = 0; k < n_layers; ++k) {
      expect("dense");
      DenseParams l;
      std::string act;
      if (!(is >> l.out >> l.in >> act)) throw std::runtime_error("checkpoint: bad layer header");
      l.act = parse_activation(act);
      l.weight.resize(l.out * l.in);
      l.bias.resize(l.out);
      for (double& w : l.weight) {
        if (!(is >> w)) throw std::runtime_error("checkpoint: truncated weights");
      }
      for (double& b : l.bias) {
        if (!(is >> b)) throw std::runtime_error("checkpoint: truncated bias");
      }
      sec.second.layers.push_back(std::move(l));
    }
    for (std::size_t k = 1; k < sec.second.layers.size(); ++k) {
      if (sec.second.layers[k].in != sec.second.layers[k - 1].out) {
        throw std::runtime_error("checkpoint: layer shapes do not chain in section " + sec.first);
      }
    }
    sec.second.touch();
    out.push_back(std::move(sec));
  }
  return out;
}

}  // namespace swnet
