#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

#include "swnet/cli.hpp"
#include "swnet/config.hpp"
#include "swnet/eval.hpp"
#include "swnet/geometry.hpp"
#include "swnet/gradsuite.hpp"
#include "swnet/losses.hpp"
#include "swnet/matching.hpp"
#include "swnet/toydet.hpp"

namespace py = pybind11;
using namespace swnet;

namespace {

using BoxT = std::tuple<double, double, double, double>;
using DetT = std::tuple<BoxT, int, double>;
using GtT = std::tuple<BoxT, int>;

Box to_box(const BoxT& b) { return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)}; }
BoxT from_box(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

std::vector<Detection> to_dets(const std::vector<DetT>& in) {
  std::vector<Detection> out;
  for (const auto& [b, c, s] : in) out.push_back({to_box(b), c, s});
  return out;
}

std::vector<DetT> from_dets(const std::vector<Detection>& in) {
  std::vector<DetT> out;
  for (const auto& d : in) out.emplace_back(from_box(d.box), d.class_id, d.score);
  return out;
}

MatchResult labels_from_strings(const std::vector<std::string>& labels) {
  MatchResult m;
  for (const auto& l : labels) {
    SampleLabel s;
    if (l == "pos") s = SampleLabel::positive;
    else if (l == "neg") s = SampleLabel::negative;
    else if (l == "ign") s = SampleLabel::ignore;
    else throw std::invalid_argument("label must be 'pos', 'neg' or 'ign', got '" + l + "'");
    m.label.push_back(s);
    m.assigned_gt.push_back(s == SampleLabel::positive ? 0 : -1);
    m.max_iou.push_back(0.0);
    m.class_id.push_back(s == SampleLabel::positive ? 1 : 0);
  }
  return m;
}

py::dict weights_dict(const WeightAssignment& w) {
  py::dict d;
  d["s_cls"] = w.s_cls;
  d["s_reg"] = w.s_reg;
  return d;
}

StrategyConfig strategy_config(int n_p, int n_n, double gamma, double rho) {
  StrategyConfig c;
  c.n_p = n_p;
  c.n_n = n_n;
  c.gamma = gamma;
  c.rho = rho;
  return c;
}

}  // namespace

PYBIND11_MODULE(_swnet, m) {
  m.doc() = "Sample weighting for object detection: losses, strategies, metrics and training";
  m.attr("__version__") = SWNET_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.def("iou", [](const BoxT& a, const BoxT& b) { return iou(to_box(a), to_box(b)); }, py::arg("a"),
        py::arg("b"));
  m.def(
      "encode_offsets",
      [](const BoxT& anchor, const BoxT& target) {
        const auto o = encode_offsets(to_box(anchor), to_box(target));
        return std::make_tuple(o.dx, o.dy, o.dw, o.dh);
      },
      py::arg("anchor"), py::arg("target"));
  m.def(
      "decode_offsets",
      [](const BoxT& anchor, const std::tuple<double, double, double, double>& off) {
        const auto [dx, dy, dw, dh] = off;
        return from_box(decode_offsets(to_box(anchor), {dx, dy, dw, dh}));
      },
      py::arg("anchor"), py::arg("offset"));
  m.def(
      "nms", [](const std::vector<DetT>& dets, double thr) { return from_dets(nms(to_dets(dets), thr)); },
      py::arg("dets"), py::arg("iou_thr"));
  m.def(
      "soft_nms",
      [](const std::vector<DetT>& dets, double sigma, double floor) {
        return from_dets(soft_nms(to_dets(dets), sigma, floor));
      },
      py::arg("dets"), py::arg("sigma"), py::arg("score_floor") = 0.001);

  m.def(
      "coco_map",
      [](const std::vector<std::vector<DetT>>& dets, const std::vector<std::vector<GtT>>& gts) {
        std::vector<std::vector<Detection>> d;
        for (const auto& s : dets) d.push_back(to_dets(s));
        std::vector<std::vector<GroundTruth>> g;
        for (const auto& s : gts) {
          g.emplace_back();
          for (const auto& [b, c] : s) g.back().push_back({to_box(b), c});
        }
        const auto r = coco_map(d, g);
        py::dict out;
        out["ap"] = r.ap;
        out["ap50"] = r.ap50;
        out["ap75"] = r.ap75;
        out["per_class"] = r.per_class_ap;
        return out;
      },
      py::arg("dets"), py::arg("gts"), "Per-scene lists of ((x1,y1,x2,y2), class, score) and ((x1,y1,x2,y2), class).");

  m.def("softmax_ce", [](const std::vector<double>& z, int label) { return softmax_ce(z, label); },
        py::arg("logits"), py::arg("label"));
  m.def(
      "uncertainty_loss",
      [](bool positive, double l_cls, double l_reg, double m_cls, double m_reg, double lambda1, double lambda2) {
        SampleRecord r;
        r.label = positive ? SampleLabel::positive : SampleLabel::negative;
        r.l_cls = l_cls;
        r.l_reg = l_reg;
        r.m_cls = m_cls;
        r.m_reg = m_reg;
        return uncertainty_loss(r, {lambda1, lambda2});
      },
      py::arg("positive"), py::arg("l_cls"), py::arg("l_reg"), py::arg("m_cls"), py::arg("m_reg"),
      py::arg("lambda1") = 0.5, py::arg("lambda2") = 0.5);
  m.def(
      "optimal_sigma",
      [](double l, double lambda2) {
        const auto s = optimal_sigma(l, lambda2);
        return std::make_tuple(s.sigma2, s.reduced_loss);
      },
      py::arg("l_reg"), py::arg("lambda2") = 1.0, "Returns (sigma^2, reduced loss).");
  m.def("regression_uncertainty_loss", &regression_uncertainty_loss, py::arg("l_reg"), py::arg("sigma"),
        py::arg("lambda2"));
  m.def("tempered_softmax", [](const std::vector<double>& z, double t) { return tempered_softmax(z, t); },
        py::arg("logits"), py::arg("t"));
  m.def("temperature_approx_error",
        [](const std::vector<double>& z, double sigma) { return temperature_approx_error(z, sigma); },
        py::arg("logits"), py::arg("sigma"));

  m.def(
      "focal_weights",
      [](const std::vector<std::string>& labels, const std::vector<double>& probs, double gamma) {
        return weights_dict(focal_weights(labels_from_strings(labels), probs, strategy_config(0, 0, gamma, 0.5)));
      },
      py::arg("labels"), py::arg("probs"), py::arg("gamma") = 2.0);
  m.def(
      "ohem_weights",
      [](const std::vector<std::string>& labels, const std::vector<double>& losses, int n_p, int n_n) {
        return weights_dict(ohem_weights(labels_from_strings(labels), losses, strategy_config(n_p, n_n, 2.0, 0.5)));
      },
      py::arg("labels"), py::arg("losses"), py::arg("n_p"), py::arg("n_n"));
  m.def(
      "random_sampling_weights",
      [](const std::vector<std::string>& labels, int n_p, int n_n, std::uint64_t seed) {
        return weights_dict(random_sampling_weights(labels_from_strings(labels), strategy_config(n_p, n_n, 2.0, 0.5), seed));
      },
      py::arg("labels"), py::arg("n_p"), py::arg("n_n"), py::arg("seed") = 0);
  m.def(
      "kl_regression_weights",
      [](const std::vector<std::string>& labels, const std::vector<double>& sigma2, std::uint64_t seed) {
        const auto m = labels_from_strings(labels);
        const auto n = static_cast<int>(labels.size());
        return weights_dict(kl_regression_weights(m, sigma2, strategy_config(n, n, 2.0, 0.5), seed));
      },
      py::arg("labels"), py::arg("sigma2"), py::arg("seed") = 0);

  m.def(
      "default_config", [] { return default_config_json().dump(); },
      "Default configuration as a JSON string.");
  m.def(
      "train",
      [](const std::string& config_json) {
        const auto merged = merge_config(nlohmann::json::parse(config_json));
        const auto cfg = parse_config(merged);
        TrainResult res;
        {
          py::gil_scoped_release release;
          res = train(cfg.train);
        }
        py::list iters;
        for (const auto& r : res.history.iterations) {
          py::dict d;
          d["iter"] = r.iter;
          d["mean_lcls"] = r.mean_lcls;
          d["mean_lreg"] = r.mean_lreg;
          d["w_cls_pos"] = r.w_cls_pos;
          d["w_cls_neg"] = r.w_cls_neg;
          d["w_reg_pos"] = r.w_reg_pos;
          d["objective"] = r.objective;
          if (r.has_map) d["map"] = r.map;
          iters.append(d);
        }
        py::dict out;
        out["iterations"] = iters;
        out["initial_map"] = res.history.initial_eval.ap;
        out["final_map"] = res.history.final_map();
        out["config_hash"] = config_hash(merged);
        return out;
      },
      py::arg("config_json") = "{}", "Train with a (partial) JSON config; returns the history.");
  m.def(
      "gradcheck",
      [](std::size_t probes) {
        GradSuiteConfig cfg;
        cfg.probes = probes;
        py::list out;
        for (const auto& c : run_gradcheck_suite(cfg)) {
          py::dict d;
          d["name"] = c.name;
          d["max_rel_err"] = c.max_rel_err;
          d["tol"] = c.tol;
          d["passed"] = c.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("probes") = 100);
  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
