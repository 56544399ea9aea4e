#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ts::cli {

/// One long-form metric value. `seed` is the replicate seed ("3"), a replicate/BC seed pair
/// ("3/1"), or "env" for environment constants.
struct MetricRow {
  std::string metric;
  std::string seed;
  int iteration = 0;
  double x_percent = 0.0;
  double value = 0.0;
};

/// `#` comment lines, then the header `metric,seed,iteration,x_percent,value`, then one row
/// per metric in the given order. Values use the shortest round-trip decimal form.
void write_metrics(std::ostream& out, const std::vector<MetricRow>& rows,
                   const std::vector<std::string>& comments = {});
std::vector<MetricRow> read_metrics(std::istream& in);

/// Aggregated iteration curve: row 0 is plain BC, row k the BC policy on the k-th TS dataset.
struct CurvePoint {
  double x_percent = 0.0;
  int iteration = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

std::vector<CurvePoint> iteration_curve(const std::vector<MetricRow>& rows);

/// Writes report.csv (iteration curve), summary.csv (per-x final comparison), iterations.svg
/// and returns_by_x.svg into `dir`. Output bytes depend only on `rows` and `comments`.
void emit_report(const std::filesystem::path& dir, const std::vector<MetricRow>& rows,
                 const std::vector<std::string>& comments = {});

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal static line chart.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);

}  // namespace ts::cli
