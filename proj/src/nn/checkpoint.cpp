#include "tstitch/nn/checkpoint.hpp"

#include <fstream>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"

namespace ts::nn {

namespace {
constexpr std::uint32_t kVersion = 1;
}

void write_checkpoint(std::ostream& out, const MlpSpec& spec, const MlpState& state) {
  BinaryWriter w(out);
  w.bytes("TSNN", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(spec.layer_sizes.size()));
  for (int s : spec.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  w.u8(static_cast<std::uint8_t>(spec.hidden));
  w.u8(static_cast<std::uint8_t>(spec.head));
  w.f64(spec.bound);
  w.u64(state.step_count);
  w.u64(state.params.size());
  for (const auto* v : {&state.params, &state.adam_m, &state.adam_v}) {
    if (v->size() != state.params.size()) throw std::invalid_argument("checkpoint: moment size");
    for (double x : *v) w.f64(x);
  }
}

void read_checkpoint(std::istream& in, MlpSpec& spec, MlpState& state) {
  BinaryReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "TSNN") throw ParseError("bad magic, expected TSNN");
  if (r.u32() != kVersion) throw ParseError("unsupported checkpoint version");
  const auto layers = r.u32();
  if (layers < 2 || layers > 64) throw ParseError("implausible layer count");
  spec.layer_sizes.resize(layers);
  for (auto& s : spec.layer_sizes) s = static_cast<int>(r.u32());
  const auto act = r.u8();
  const auto head = r.u8();
  if (act > 2 || head > 2) throw ParseError("bad activation/head code");
  spec.hidden = static_cast<Activation>(act);
  spec.head = static_cast<Head>(head);
  spec.bound = r.f64();
  spec.check();
  state.step_count = r.u64();
  const auto n = r.u64();
  if (n != spec.param_count()) throw SchemaError("checkpoint parameter count disagrees with spec");
  for (auto* v : {&state.params, &state.adam_m, &state.adam_v}) {
    v->resize(n);
    for (auto& x : *v) x = r.f64();
  }
}

void save_checkpoint(const std::filesystem::path& path, const MlpSpec& spec,
                     const MlpState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_checkpoint(out, spec, state);
}

void load_checkpoint(const std::filesystem::path& path, MlpSpec& spec, MlpState& state) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact(path.string());
  read_checkpoint(in, spec, state);
}

void write_normalizer(std::ostream& out, const Normalizer& n) {
  BinaryWriter w(out);
  w.u32(static_cast<std::uint32_t>(n.mean.size()));
  for (Eigen::Index i = 0; i < n.mean.size(); ++i) w.f64(n.mean[i]);
  for (Eigen::Index i = 0; i < n.scale.size(); ++i) w.f64(n.scale[i]);
}

Normalizer read_normalizer(std::istream& in) {
  BinaryReader r(in);
  const auto d = static_cast<Eigen::Index>(r.u32());
  Normalizer n{Vec(d), Vec(d)};
  for (Eigen::Index i = 0; i < d; ++i) n.mean[i] = r.f64();
  for (Eigen::Index i = 0; i < d; ++i) n.scale[i] = r.f64();
  return n;
}

}  // namespace ts::nn
