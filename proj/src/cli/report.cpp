#include <charconv>
#include "tstitch/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"

namespace ts::cli {

namespace {

constexpr const char* kHeader = "metric,seed,iteration,x_percent,value";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("metrics: bad number '" + s + "'", line);
  return v;
}

struct Stats {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return s;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out.push_back(c);
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

std::string comment_block(const std::vector<std::string>& comments) {
  std::string s;
  for (const auto& c : comments) s += "# " + c + "\n";
  return s;
}

}  // namespace

void write_metrics(std::ostream& out, const std::vector<MetricRow>& rows,
                   const std::vector<std::string>& comments) {
  out << comment_block(comments) << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.metric << ',' << r.seed << ',' << r.iteration << ',' << format_real(r.x_percent) << ','
        << format_real(r.value) << '\n';
  }
}

std::vector<MetricRow> read_metrics(std::istream& in) {
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kHeader) throw ParseError("metrics: expected header '" + std::string(kHeader) + "'", n);
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 5) throw ParseError("metrics: expected 5 fields", n);
    MetricRow r;
    r.metric = f[0];
    r.seed = f[1];
    try {
      r.iteration = std::stoi(f[2]);
    } catch (const std::exception&) {
      throw ParseError("metrics: bad iteration '" + f[2] + "'", n);
    }
    r.x_percent = parse_double(f[3], n);
    r.value = parse_double(f[4], n);
    rows.push_back(std::move(r));
  }
  if (!header) throw ParseError("metrics: missing header");
  return rows;
}

std::vector<CurvePoint> iteration_curve(const std::vector<MetricRow>& rows) {
  std::map<std::pair<double, int>, std::vector<double>> groups;
  for (const auto& r : rows) {
    if ((r.metric == "bc_return" && r.iteration == 0) || (r.metric == "tsbc_return" && r.iteration > 0)) {
      groups[{r.x_percent, r.iteration}].push_back(r.value);
    }
  }
  std::vector<CurvePoint> out;
  for (const auto& [key, values] : groups) {
    const auto s = stats_of(values);
    out.push_back({key.first, key.second, s.mean, s.stderr_, s.n});
  }
  return out;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) {
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 1, x1 += 1;
  if (y1 == y0) y0 -= 1, y1 += 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0, xv = x0 + (x1 - x0) * i / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4, 1) << "\" text-anchor=\"end\">" << fixed(yv) << "</text>\n";
    os << "<text x=\"" << fixed(px(xv), 1) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(xv, 1) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* c = colors[i % 6];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (k) os << ' ';
      os << fixed(px(s.x[k]), 1) << ',' << fixed(py(s.y[k]), 1);
    }
    os << "\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      os << "<circle cx=\"" << fixed(px(s.x[k]), 1) << "\" cy=\"" << fixed(py(s.y[k]), 1) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    const double ly = T + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_report(const std::filesystem::path& dir, const std::vector<MetricRow>& rows,
                 const std::vector<std::string>& comments) {
  const bool any_policy = std::any_of(rows.begin(), rows.end(), [](const MetricRow& r) {
    return r.metric == "bc_return" || r.metric == "tsbc_return";
  });
  if (!any_policy) throw std::runtime_error("report: metrics contain no policy returns");
  std::filesystem::create_directories(dir);

  const auto curve = iteration_curve(rows);
  std::ostringstream csv;
  csv << comment_block(comments) << "x_percent,iteration,policy,mean_return,stderr,n\n";
  for (const auto& p : curve) {
    csv << format_real(p.x_percent) << ',' << p.iteration << ',' << (p.iteration == 0 ? "bc" : "tsbc") << ','
        << format_real(p.mean) << ',' << format_real(p.stderr_) << ',' << p.n << '\n';
  }
  write_file(dir / "report.csv", csv.str());

  std::map<double, Series> by_x;
  for (const auto& p : curve) {
    auto& s = by_x[p.x_percent];
    s.label = "x = " + format_real(p.x_percent) + "%";
    s.x.push_back(p.iteration);
    s.y.push_back(p.mean);
  }
  std::vector<Series> iter_series;
  for (auto& [_, s] : by_x) iter_series.push_back(std::move(s));
  write_file(dir / "iterations.svg",
             line_chart_svg("BC return vs TS iteration (0 = BC)", "iteration", "mean return", iter_series));

  // Per-x comparison: BC, final TS+BC, weighted BC when present.
  const std::vector<std::string> cols{"bc_return", "tsbc_return", "wbc_return", "kl_bc", "kl_tsbc",
                                      "action_mse_bc", "action_mse_tsbc"};
  std::map<double, std::map<std::string, std::vector<double>>> per_x;
  std::map<double, int> last_iter;
  for (const auto& r : rows) {
    if (r.metric == "tsbc_return") last_iter[r.x_percent] = std::max(last_iter[r.x_percent], r.iteration);
  }
  for (const auto& r : rows) {
    if (std::find(cols.begin(), cols.end(), r.metric) == cols.end()) continue;
    if (r.metric == "tsbc_return" && r.iteration != last_iter[r.x_percent]) continue;
    per_x[r.x_percent][r.metric].push_back(r.value);
  }
  std::ostringstream sum;
  sum << comment_block(comments) << "x_percent";
  for (const auto& c : cols) sum << ',' << c;
  sum << '\n';
  std::map<std::string, Series> lines;
  for (const auto& [x, metrics] : per_x) {
    sum << format_real(x);
    for (const auto& c : cols) {
      sum << ',';
      if (auto it = metrics.find(c); it != metrics.end()) {
        const double m = stats_of(it->second).mean;
        sum << format_real(m);
        if (c == "bc_return" || c == "tsbc_return" || c == "wbc_return") {
          auto& s = lines[c];
          s.label = c == "bc_return" ? "BC" : c == "tsbc_return" ? "TS+BC" : "weighted BC";
          s.x.push_back(x);
          s.y.push_back(m);
        }
      }
    }
    sum << '\n';
  }
  write_file(dir / "summary.csv", sum.str());
  std::vector<Series> x_series;
  for (const auto* key : {"bc_return", "tsbc_return", "wbc_return"}) {
    if (auto it = lines.find(key); it != lines.end()) x_series.push_back(it->second);
  }
  write_file(dir / "returns_by_x.svg",
             line_chart_svg("Policy return by expert share", "expert trajectories (%)", "mean return", x_series));
}

}  // namespace ts::cli
