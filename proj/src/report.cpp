#include "swnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace swnet {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr double kW = 640.0, kH = 400.0, kLeft = 60.0, kRight = 150.0, kTop = 40.0, kBottom = 40.0;

void svg_open(std::ostream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n";
}

void svg_axes(std::ostream& os, double ylo, double yhi) {
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ylo + (yhi - ylo) * k / 4.0;
    const double y = y0 - (y0 - y1) * k / 4.0;
    os << "<text x=\"" << x0 - 4 << "\" y=\"" << fixed(y + 4, 1) << "\" text-anchor=\"end\">"
       << format_number(std::round(v * 1000.0) / 1000.0) << "</text>\n";
  }
}

void svg_legend(std::ostream& os, std::span<const Series> series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 16.0 * static_cast<double>(i);
    os << "<rect x=\"" << kW - kRight + 10 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[i % 8] << "\"/>\n<text x=\"" << kW - kRight + 24 << "\" y=\"" << y + 9 << "\">"
       << escape(series[i].name) << "</text>\n";
  }
}

std::pair<double, double> y_range(std::span<const Series> series, bool include_zero) {
  double lo = include_zero ? 0.0 : INFINITY, hi = include_zero ? 0.0 : -INFINITY;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi - lo < 1e-12) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_history_csv(std::ostream& os, const TrainHistory& h) {
  os << "iter,mean_lcls,mean_lreg,w_cls_pos,w_cls_neg,w_reg_pos,map\n";
  for (const auto& r : h.iterations) {
    os << r.iter << ',' << format_number(r.mean_lcls) << ',' << format_number(r.mean_lreg) << ','
       << format_number(r.w_cls_pos) << ',' << format_number(r.w_cls_neg) << ','
       << format_number(r.w_reg_pos) << ',';
    if (r.has_map) os << format_number(r.map);
    os << '\n';
  }
}

void write_trace_csv(std::ostream& os, const ConvergenceSeries& s) {
  os << "iter,w_cls_pos,w_cls_neg,w_reg_pos,w_cls_all,mean_lcls,mean_lreg\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << s.iter[i] << ',' << format_number(s.w_cls_pos[i]) << ',' << format_number(s.w_cls_neg[i])
       << ',' << format_number(s.w_reg_pos[i]) << ',' << format_number(s.w_cls_all[i]) << ','
       << format_number(s.mean_lcls[i]) << ',' << format_number(s.mean_lreg[i]) << '\n';
  }
}

void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows) {
  os << "strategy,map,ap50,ap75,mean_w_cls,mean_w_reg\n";
  for (const auto& r : rows) {
    os << r.strategy << ',' << format_number(r.map) << ',' << format_number(r.ap50) << ','
       << format_number(r.ap75) << ',' << format_number(r.mean_w_cls) << ','
       << format_number(r.mean_w_reg) << '\n';
  }
}

void write_lambda_csv(std::ostream& os, std::span<const LambdaRow> rows) {
  os << "lambda,map,ap50,ap75,mean_w_cls,mean_w_reg\n";
  for (const auto& r : rows) {
    os << format_number(r.lambda) << ',' << format_number(r.map) << ',' << format_number(r.ap50)
       << ',' << format_number(r.ap75) << ',' << format_number(r.mean_w_cls) << ','
       << format_number(r.mean_w_reg) << '\n';
  }
}

void write_gradcheck_csv(std::ostream& os, std::span<const GradCaseResult> rows) {
  os << "case,kind,probes,checked,excluded,max_rel_err,tol,passed\n";
  for (const auto& r : rows) {
    os << r.name << ',' << (r.pipeline ? "pipeline" : "pure") << ',' << r.probes << ',' << r.checked
       << ',' << r.excluded << ',' << format_number(r.max_rel_err) << ',' << format_number(r.tol)
       << ',' << (r.passed ? 1 : 0) << '\n';
  }
}

void write_histograms_csv(std::ostream& os, std::span<const NamedHistogram> hists) {
  os << "histogram,bin_lo,bin_hi,count,percent\n";
  for (const auto& h : hists) {
    for (std::size_t b = 0; b < h.hist.bins(); ++b) {
      os << h.name << ',' << format_number(h.hist.edges[b]) << ',' << format_number(h.hist.edges[b + 1])
         << ',' << h.hist.counts[b] << ',' << format_number(h.hist.percent[b]) << '\n';
    }
  }
}

void write_sensitivity_csv(std::ostream& os, const SensitivityResult& r) {
  os << "iter";
  for (double b : r.biases) os << ",cls_b" << format_number(b) << ",reg_b" << format_number(b);
  os << '\n';
  const std::size_t n = r.cls_traces.empty() ? 0 : r.cls_traces.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    os << i + 1;
    for (std::size_t k = 0; k < r.biases.size(); ++k) {
      os << ',' << format_number(r.cls_traces[k][i]) << ',' << format_number(r.reg_traces[k][i]);
    }
    os << '\n';
  }
}

void write_line_chart_svg(std::ostream& os, const std::string& title, std::span<const double> x,
                          std::span<const Series> series) {
  svg_open(os, title);
  const auto [ylo, yhi] = y_range(series, false);
  svg_axes(os, ylo, yhi);
  const double xlo = x.empty() ? 0.0 : x.front();
  const double xhi = x.empty() || x.back() == xlo ? xlo + 1.0 : x.back();
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  os << "<text x=\"" << x0 << "\" y=\"" << kH - 12 << "\">" << format_number(xlo) << "</text>\n"
     << "<text x=\"" << x1 << "\" y=\"" << kH - 12 << "\" text-anchor=\"end\">" << format_number(xhi)
     << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 8] << "\" stroke-width=\"1.5\" points=\"";
    const std::size_t n = std::min(x.size(), series[s].y.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double v = series[s].y[i];
      if (!std::isfinite(v)) continue;
      const double px = x0 + (x[i] - xlo) / (xhi - xlo) * (x1 - x0);
      const double py = y0 - (v - ylo) / (yhi - ylo) * (y0 - y1);
      os << fixed(px) << ',' << fixed(py) << ' ';
    }
    os << "\"/>\n";
  }
  svg_legend(os, series);
  os << "</svg>\n";
}

void write_bar_chart_svg(std::ostream& os, const std::string& title,
                         std::span<const std::string> labels, std::span<const Series> series) {
  svg_open(os, title);
  const auto [ylo, yhi] = y_range(series, true);
  svg_axes(os, ylo, yhi);
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
  const double group = labels.empty() ? 1.0 : (x1 - x0) / static_cast<double>(labels.size());
  const double bar = group * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  auto to_y = [&](double v) { return y0 - (v - ylo) / (yhi - ylo) * (y0 - y1); };
  for (std::size_t g = 0; g < labels.size(); ++g) {
    const double gx = x0 + group * static_cast<double>(g) + group * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (g >= series[s].y.size() || !std::isfinite(series[s].y[g])) continue;
      const double v = series[s].y[g];
      const double top = to_y(std::max(v, 0.0)), bottom = to_y(std::min(v, 0.0));
      os << "<rect x=\"" << fixed(gx + bar * static_cast<double>(s)) << "\" y=\"" << fixed(top)
         << "\" width=\"" << fixed(bar) << "\" height=\"" << fixed(bottom - top) << "\" fill=\""
         << kPalette[s % 8] << "\"/>\n";
    }
    os << "<text x=\"" << fixed(gx + group * 0.4) << "\" y=\"" << kH - 20
       << "\" text-anchor=\"middle\">" << escape(labels[g]) << "</text>\n";
  }
  svg_legend(os, series);
  os << "</svg>\n";
}

}  // namespace swnet
