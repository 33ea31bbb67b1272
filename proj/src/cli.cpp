#include "swnet/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "swnet/analysis.hpp"
#include "swnet/config.hpp"
#include "swnet/gradsuite.hpp"
#include "swnet/report.hpp"

namespace swnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  std::string command;
  RunConfig cfg;
  json merged;
  std::string hash;
  fs::path out_dir;
  std::vector<std::string> outputs;
  std::ostream& out;

  std::string name(const std::string& stem, const std::string& ext) const {
    return stem + "-" + hash + "." + ext;
  }

  template <class Fn>
  void write(const std::string& file, Fn&& fn) {
    const fs::path path = out_dir / file;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
    fn(os);
    os.flush();
    if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
    outputs.push_back(file);
  }
};

std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<double> iteration_axis(const TrainHistory& h) {
  std::vector<double> x;
  for (const auto& r : h.iterations) x.push_back(r.iter);
  return x;
}

void write_trace_outputs(Context& ctx, const TrainHistory& h) {
  if (h.iterations.empty()) return;
  const auto trace = convergence_trace(h, ctx.cfg.analysis.smoothing_width);
  ctx.write(ctx.name("trace", "csv"), [&](std::ostream& os) { write_trace_csv(os, trace); });
  if (!ctx.cfg.analysis.charts) return;
  const auto x = iteration_axis(h);
  const std::vector<Series> weights{{"w_cls_pos", trace.w_cls_pos},
                                    {"w_cls_neg", trace.w_cls_neg},
                                    {"w_reg_pos", trace.w_reg_pos}};
  ctx.write(ctx.name("weights", "svg"),
            [&](std::ostream& os) { write_line_chart_svg(os, "Mean sample weights", x, weights); });
  const std::vector<Series> losses{{"mean_lcls", trace.mean_lcls}, {"mean_lreg", trace.mean_lreg}};
  ctx.write(ctx.name("losses", "svg"),
            [&](std::ostream& os) { write_line_chart_svg(os, "Mean losses", x, losses); });
}

void print_eval(std::ostream& out, const char* label, const EvalReport& r) {
  out << label << ": mAP " << brief(r.ap) << "  AP50 " << brief(r.ap50) << "  AP75 "
      << brief(r.ap75) << '\n';
}

int cmd_train(Context& ctx) {
  const auto res = train(ctx.cfg.train);
  ctx.write(ctx.name("history", "csv"), [&](std::ostream& os) { write_history_csv(os, res.history); });
  const std::vector<NamedMlp> det{{"cls", res.detector.cls}, {"reg", res.detector.reg}};
  ctx.write(ctx.name("detector", "ckpt"), [&](std::ostream& os) { write_checkpoint(os, det); });
  if (ctx.cfg.train.strategy == Strategy::swn) {
    const auto sections = swn_sections(res.swn);
    ctx.write(ctx.name("swn", "ckpt"), [&](std::ostream& os) { write_checkpoint(os, sections); });
  }
  write_trace_outputs(ctx, res.history);
  ctx.out << "strategy " << strategy_name(ctx.cfg.train.strategy) << ", "
          << res.history.iterations.size() << " iterations\n";
  print_eval(ctx.out, "initial", res.history.initial_eval);
  for (auto it = res.history.epochs.rbegin(); it != res.history.epochs.rend(); ++it) {
    if (it->evaluated) {
      print_eval(ctx.out, "final", it->eval);
      break;
    }
  }
  return kExitOk;
}

int cmd_compare(Context& ctx) {
  const auto& strategies = ctx.cfg.analysis.compare_strategies;
  const auto rows = run_strategy_comparison(ctx.cfg.train, strategies);
  ctx.write(ctx.name("compare", "csv"), [&](std::ostream& os) { write_comparison_csv(os, rows); });
  if (ctx.cfg.analysis.charts) {
    std::vector<std::string> labels;
    Series map{"mAP", {}}, ap50{"AP50", {}};
    for (const auto& r : rows) {
      labels.push_back(r.strategy);
      map.y.push_back(r.map);
      ap50.y.push_back(r.ap50);
    }
    const std::vector<Series> series{map, ap50};
    ctx.write(ctx.name("compare", "svg"), [&](std::ostream& os) {
      write_bar_chart_svg(os, "Held-out AP by strategy", labels, series);
    });
  }
  for (const auto& r : rows) ctx.out << r.strategy << ": mAP " << brief(r.map) << '\n';
  return kExitOk;
}

int cmd_gradcheck(Context& ctx) {
  const auto rows = run_gradcheck_suite(ctx.cfg.gradcheck);
  ctx.write(ctx.name("gradcheck", "csv"), [&](std::ostream& os) { write_gradcheck_csv(os, rows); });
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : rows) {
    ctx.out << r.name << ": max rel err " << brief(r.max_rel_err) << " (tol "
            << brief(r.tol) << ") " << (r.passed ? "ok" : "FAILED") << '\n';
    ok = ok && r.passed;
    worst = std::max(worst, r.max_rel_err);
  }
  ctx.out << "overall max rel err " << brief(worst) << '\n';
  return ok ? kExitOk : kExitRuntime;
}

int cmd_analyze(Context& ctx) {
  const auto res = train(ctx.cfg.train);
  const auto& h = res.history;
  ctx.write(ctx.name("history", "csv"), [&](std::ostream& os) { write_history_csv(os, h); });
  write_trace_outputs(ctx, h);
  if (h.epochs.empty()) return kExitOk;

  auto records = [](const EpochSnapshot& e) {
    std::vector<SampleRecord> r;
    for (const auto& p : e.positives) r.push_back(p.rec);
    return r;
  };
  const auto first = records(h.epochs.front());
  const auto last = records(h.epochs.back());
  const std::string e1 = "epoch" + std::to_string(h.epochs.front().epoch);
  const std::string eN = "epoch" + std::to_string(h.epochs.back().epoch);
  const double bw = ctx.cfg.analysis.bin_width;
  std::vector<NamedHistogram> hists;
  for (bool weighted : {true, false}) {
    const std::string tag = weighted ? "weighted" : "unweighted";
    hists.push_back({"cls_" + tag + "_" + e1, loss_distribution_by_iou(first, LossKind::cls, weighted, bw)});
    hists.push_back({"cls_" + tag + "_" + eN, loss_distribution_by_iou(last, LossKind::cls, weighted, bw)});
    hists.push_back({"reg_" + tag + "_" + e1, loss_distribution_by_iou(first, LossKind::reg, weighted, bw)});
    hists.push_back({"reg_" + tag + "_" + eN, loss_distribution_by_iou(last, LossKind::reg, weighted, bw)});
  }
  ctx.write(ctx.name("histograms", "csv"), [&](std::ostream& os) { write_histograms_csv(os, hists); });
  if (ctx.cfg.analysis.charts) {
    for (const char* task : {"cls", "reg"}) {
      std::vector<std::string> labels;
      std::vector<Series> series;
      for (const auto& nh : hists) {
        if (nh.name.rfind(std::string(task) + "_weighted_", 0) != 0 || nh.hist.empty()) continue;
        if (labels.empty()) {
          for (std::size_t b = 0; b < nh.hist.bins(); ++b) {
            labels.push_back(format_number(std::round(nh.hist.edges[b] * 100.0) / 100.0));
          }
        }
        series.push_back({nh.name, nh.hist.percent});
      }
      if (series.empty()) continue;
      ctx.write(ctx.name(std::string("hist_") + task, "svg"), [&](std::ostream& os) {
        write_bar_chart_svg(os, std::string("Weighted ") + task + " loss share by IoU", labels, series);
      });
    }
  }
  ctx.out << "analyzed " << h.iterations.size() << " iterations, " << h.epochs.size() << " epochs\n";
  return kExitOk;
}

int cmd_sweep(Context& ctx) {
  const auto rows = lambda_sweep(ctx.cfg.train, ctx.cfg.analysis.sweep_lambdas, ctx.cfg.analysis.jobs);
  ctx.write(ctx.name("sweep", "csv"), [&](std::ostream& os) { write_lambda_csv(os, rows); });
  if (ctx.cfg.analysis.charts) {
    std::vector<std::string> labels;
    Series map{"mAP", {}};
    for (const auto& r : rows) {
      labels.push_back(format_number(r.lambda));
      map.y.push_back(r.map);
    }
    const std::vector<Series> series{map};
    ctx.write(ctx.name("sweep", "svg"),
              [&](std::ostream& os) { write_bar_chart_svg(os, "mAP by lambda", labels, series); });
  }
  for (const auto& r : rows) ctx.out << "lambda " << brief(r.lambda) << ": mAP " << brief(r.map) << '\n';
  return kExitOk;
}

int cmd_sensitivity(Context& ctx) {
  const auto& a = ctx.cfg.analysis;
  const auto r = init_sensitivity(ctx.cfg.train, a.sensitivity_biases, a.sensitivity_k,
                                  a.smoothing_width, a.jobs);
  ctx.write(ctx.name("sensitivity", "csv"), [&](std::ostream& os) { write_sensitivity_csv(os, r); });
  ctx.write(ctx.name("sensitivity-summary", "csv"), [&](std::ostream& os) {
    os << "task,k,gap,mean,relative_gap\n"
       << "cls," << r.k << ',' << format_number(r.cls_gap) << ',' << format_number(r.cls_mean) << ','
       << format_number(r.cls_relative_gap()) << '\n'
       << "reg," << r.k << ',' << format_number(r.reg_gap) << ',' << format_number(r.reg_mean) << ','
       << format_number(r.reg_relative_gap()) << '\n';
  });
  if (a.charts && !r.cls_traces.empty()) {
    std::vector<double> x;
    for (std::size_t i = 0; i < r.cls_traces.front().size(); ++i) x.push_back(static_cast<double>(i + 1));
    std::vector<Series> series;
    for (std::size_t k = 0; k < r.biases.size(); ++k) {
      series.push_back({"CLS b=" + format_number(r.biases[k]), r.cls_traces[k]});
      series.push_back({"REG b=" + format_number(r.biases[k]), r.reg_traces[k]});
    }
    ctx.write(ctx.name("sensitivity", "svg"), [&](std::ostream& os) {
      write_line_chart_svg(os, "Averaged weights by initial bias", x, series);
    });
  }
  ctx.out << "cls gap " << brief(r.cls_gap) << " (relative " << brief(r.cls_relative_gap())
          << "), reg gap " << brief(r.reg_gap) << " (relative "
          << brief(r.reg_relative_gap()) << ")\n";
  return kExitOk;
}

void write_manifest(Context& ctx) {
  json m;
  m["manifest_version"] = 1;
  m["command"] = ctx.command;
  m["artifact_version"] = SWNET_VERSION;
  m["config_hash"] = ctx.hash;
  m["config"] = ctx.merged;
  m["outputs"] = ctx.outputs;
  const fs::path path = ctx.out_dir / "run.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << m.dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sample weighting experiments on a synthetic detection benchmark", "swnet"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Config file or run.json manifest");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", overrides, "Override a config value, e.g. train.epochs=2")->take_all();
  app.add_option("--seed", seed, "Override the master seed");
  app.fallthrough();
  app.set_version_flag("--version", SWNET_VERSION);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"train", "Train the detector with the configured strategy"},
      {"compare", "Train once per strategy on shared data"},
      {"gradcheck", "Finite-difference check of all hand-written gradients"},
      {"analyze", "Loss-by-IoU histograms and convergence traces"},
      {"sweep", "Sweep the regularizer weight lambda"},
      {"sensitivity", "Initial-bias sensitivity of the weighting network"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << SWNET_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();

  json merged;
  RunConfig cfg;
  try {
    const json user = config_path.empty() ? json::object() : load_config_file(config_path);
    merged = merge_config(user);
    for (const auto& o : overrides) apply_override(merged, o);
    if (seed) merged["seed"] = *seed;
    cfg = parse_config(merged);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  Context ctx{command, cfg, merged, config_hash(merged), fs::path(out_dir), {}, out};
  try {
    fs::create_directories(ctx.out_dir);
  } catch (const fs::filesystem_error& e) {
    err << "error: cannot create output directory '" << out_dir << "': " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    int code = kExitOk;
    if (command == "train") code = cmd_train(ctx);
    else if (command == "compare") code = cmd_compare(ctx);
    else if (command == "gradcheck") code = cmd_gradcheck(ctx);
    else if (command == "analyze") code = cmd_analyze(ctx);
    else if (command == "sweep") code = cmd_sweep(ctx);
    else if (command == "sensitivity") code = cmd_sensitivity(ctx);
    write_manifest(ctx);
    return code;
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged at iteration " << e.iteration() << " (sample " << e.sample()
        << ")\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitRuntime;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace swnet::cli
