#include "tstitch/dataset_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"

namespace ts {

namespace {

constexpr std::uint32_t kVersion = 1;

void append_reals(std::string& line, std::span<const double> values) {
  for (double v : values) {
    line += ' ';
    line += format_real(v);
  }
}

class LineFields {
 public:
  LineFields(const std::string& line, std::size_t line_no) : line_(line), line_no_(line_no) {}

  std::string_view next() {
    while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
    if (pos_ >= line_.size()) throw ParseError("too few fields", line_no_);
    const auto start = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ') ++pos_;
    return std::string_view(line_).substr(start, pos_ - start);
  }

  double real() {
    const auto tok = next();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("bad real '" + std::string(tok) + "'", line_no_);
    }
    return v;
  }

  std::uint64_t integer() {
    const auto tok = next();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("bad integer '" + std::string(tok) + "'", line_no_);
    }
    return v;
  }

  void reals(std::vector<double>& out, std::size_t n) {
    out.resize(n);
    for (auto& v : out) v = real();
  }

  bool exhausted() {
    while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\r')) ++pos_;
    return pos_ >= line_.size();
  }

 private:
  const std::string& line_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

Dims parse_header(const std::string& line) {
  std::istringstream in(line);
  std::string magic, version, ds, da;
  in >> magic >> version >> ds >> da;
  if (magic != "TSDS" || version != "v1" || ds.rfind("dS=", 0) != 0 || da.rfind("dA=", 0) != 0) {
    throw ParseError("expected header 'TSDS v1 dS=<int> dA=<int>'", 1);
  }
  try {
    return Dims{std::stoul(ds.substr(3)), std::stoul(da.substr(3))};
  } catch (const std::exception&) {
    throw ParseError("bad dimension in header", 1);
  }
}

}  // namespace

void write_text(std::ostream& out, const Dataset& dataset) {
  out << "TSDS v1 dS=" << dataset.dims.state << " dA=" << dataset.dims.action << '\n';
  for (const auto& [key, value] : dataset.meta) out << "# " << key << '=' << value << '\n';
  std::string line;
  for (const auto& traj : dataset.trajectories) {
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const auto& tr = traj.steps[t];
      line = std::to_string(traj.id) + ' ' + std::to_string(t);
      append_reals(line, tr.state);
      append_reals(line, tr.action);
      line += ' ';
      line += format_real(tr.reward);
      append_reals(line, tr.next_state);
      line += tr.terminal ? " 1" : " 0";
      out << line << '\n';
    }
  }
}

Dataset read_text(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ds.dims = parse_header(line);

  std::unordered_map<std::uint64_t, std::size_t> position;
  std::size_t line_no = 1;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (seen_data) throw ParseError("provenance line after data", line_no);
      const auto eq = line.find('=');
      if (line.size() < 3 || line[1] != ' ' || eq == std::string::npos) {
        throw ParseError("provenance line must read '# key=value'", line_no);
      }
      ds.meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    seen_data = true;
    LineFields f(line, line_no);
    const auto id = f.integer();
    const auto step = f.integer();
    auto [it, inserted] = position.try_emplace(id, ds.trajectories.size());
    if (inserted) ds.trajectories.push_back(Trajectory{id, {}});
    auto& traj = ds.trajectories[it->second];
    if (step != traj.size()) {
      throw ParseError("trajectory " + std::to_string(id) + " expected step " +
                           std::to_string(traj.size()) + ", got " + std::to_string(step),
                       line_no);
    }
    Transition tr;
    f.reals(tr.state, ds.dims.state);
    f.reals(tr.action, ds.dims.action);
    tr.reward = f.real();
    f.reals(tr.next_state, ds.dims.state);
    const auto term = f.integer();
    if (term > 1) throw ParseError("terminal flag must be 0 or 1", line_no);
    tr.terminal = term == 1;
    if (!f.exhausted()) {
      throw SchemaError("line " + std::to_string(line_no) + ": more fields than dS=" +
                        std::to_string(ds.dims.state) + " dA=" + std::to_string(ds.dims.action) +
                        " allow");
    }
    traj.steps.push_back(std::move(tr));
  }
  return ds;
}

void write_binary(std::ostream& out, const Dataset& dataset) {
  BinaryWriter w(out);
  w.bytes("TSDS", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dataset.dims.state));
  w.u32(static_cast<std::uint32_t>(dataset.dims.action));
  w.u64(dataset.trajectories.size());
  for (const auto& traj : dataset.trajectories) {
    w.u64(traj.id);
    w.u64(traj.size());
    for (const auto& tr : traj.steps) {
      if (tr.state.size() != dataset.dims.state || tr.next_state.size() != dataset.dims.state ||
          tr.action.size() != dataset.dims.action) {
        throw SchemaError("trajectory " + std::to_string(traj.id) +
                          " has a transition with the wrong widths");
      }
      for (double v : tr.state) w.f64(v);
      for (double v : tr.action) w.f64(v);
      w.f64(tr.reward);
      for (double v : tr.next_state) w.f64(v);
      w.u8(tr.terminal ? 1 : 0);
    }
  }
  w.u64(dataset.meta.size());
  for (const auto& [key, value] : dataset.meta) {
    w.str(key);
    w.str(value);
  }
}

Dataset read_binary(std::istream& in) {
  BinaryReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "TSDS") throw ParseError("bad magic, expected TSDS");
  if (const auto v = r.u32(); v != kVersion) {
    throw ParseError("unsupported dataset version " + std::to_string(v));
  }
  Dataset ds;
  ds.dims.state = r.u32();
  ds.dims.action = r.u32();
  const auto count = r.u64();
  ds.trajectories.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Trajectory traj;
    traj.id = r.u64();
    const auto len = r.u64();
    traj.steps.resize(len);
    for (auto& tr : traj.steps) {
      tr.state.resize(ds.dims.state);
      tr.action.resize(ds.dims.action);
      tr.next_state.resize(ds.dims.state);
      for (auto& v : tr.state) v = r.f64();
      for (auto& v : tr.action) v = r.f64();
      tr.reward = r.f64();
      for (auto& v : tr.next_state) v = r.f64();
      const auto term = r.u8();
      if (term > 1) throw ParseError("terminal byte must be 0 or 1");
      tr.terminal = term == 1;
    }
    ds.trajectories.push_back(std::move(traj));
  }
  const auto n_meta = r.u64();
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    auto key = r.str();
    ds.meta[std::move(key)] = r.str();
  }
  return ds;
}

namespace {

bool is_text_path(const std::filesystem::path& path) { return path.extension() == ".txt"; }

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (is_text_path(path)) {
    write_text(out, dataset);
  } else {
    write_binary(out, dataset);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path.string());
  return is_text_path(path) ? read_text(in) : read_binary(in);
}

}  // namespace ts
