#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "swnet/analysis.hpp"
#include "swnet/gradsuite.hpp"
#include "swnet/toydet.hpp"

namespace swnet {

/// 17 significant digits, so written values round-trip exactly.
std::string format_number(double v);

void write_history_csv(std::ostream& os, const TrainHistory& h);
void write_trace_csv(std::ostream& os, const ConvergenceSeries& s);
void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows);
void write_lambda_csv(std::ostream& os, std::span<const LambdaRow> rows);
void write_gradcheck_csv(std::ostream& os, std::span<const GradCaseResult> rows);

struct NamedHistogram {
  std::string name;
  IoUHistogram hist;
};
void write_histograms_csv(std::ostream& os, std::span<const NamedHistogram> hists);
void write_sensitivity_csv(std::ostream& os, const SensitivityResult& r);

struct Series {
  std::string name;
  std::vector<double> y;
};

/// Minimal static SVG line chart; all series share x.
void write_line_chart_svg(std::ostream& os, const std::string& title, std::span<const double> x,
                          std::span<const Series> series);
/// Grouped bar chart: one group per label, one bar per series.
void write_bar_chart_svg(std::ostream& os, const std::string& title,
                         std::span<const std::string> labels, std::span<const Series> series);

}  // namespace swnet
