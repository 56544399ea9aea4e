#include <istream>
#include <ostream>
#include <string_view>

#include "tstitch/errors.hpp"
#include "tstitch/io_util.hpp"
#include "tstitch/nn/checkpoint.hpp"
#include "tstitch/stitch/stitching.hpp"

namespace ts::stitch {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_net(std::ostream& out, const nn::MlpSpec& spec, const nn::MlpState& state) {
  nn::write_checkpoint(out, spec, state);
}

void read_net(std::istream& in, nn::MlpSpec& spec, nn::MlpState& state) {
  nn::read_checkpoint(in, spec, state);
}

void write_reals(BinaryWriter& w, const std::vector<double>& v) {
  w.u64(v.size());
  for (double x : v) w.f64(x);
}

std::vector<double> read_reals(BinaryReader& r) {
  const auto n = r.u64();
  if (n > (1u << 24)) throw ParseError("model store: implausible vector length");
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

}  // namespace

void write_models(std::ostream& out, const TrainedModels& m) {
  BinaryWriter w(out);
  w.bytes("TSEM", 4);
  w.u32(kVersion);

  const auto& f = m.forward;
  nn::write_normalizer(out, f.state_norm);
  nn::write_normalizer(out, f.delta_norm);
  write_reals(w, f.holdout_nll);
  write_reals(w, f.discarded_nll);
  w.u32(static_cast<std::uint32_t>(f.members.size()));
  for (const auto& member : f.members) write_net(out, f.spec, member);

  const auto& inv = m.inverse;
  nn::write_normalizer(out, inv.state_norm);
  write_net(out, inv.encoder_spec, inv.encoder);
  write_net(out, inv.decoder_spec, inv.decoder);

  const auto& r = m.reward;
  w.str(models::to_string(r.kind));
  w.u32(static_cast<std::uint32_t>(r.z_dim));
  nn::write_normalizer(out, r.input_norm);
  nn::write_normalizer(out, r.reward_norm);
  write_net(out, r.main_spec, r.main);
  w.u8(r.aux.params.empty() ? 0 : 1);
  if (!r.aux.params.empty()) write_net(out, r.aux_spec, r.aux);
}

TrainedModels read_models(std::istream& in) {
  BinaryReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "TSEM") throw ParseError("not a model store");
  if (r.u32() != kVersion) throw ParseError("model store: unsupported version");

  TrainedModels m;
  auto& f = m.forward;
  f.state_norm = nn::read_normalizer(in);
  f.delta_norm = nn::read_normalizer(in);
  f.holdout_nll = read_reals(r);
  f.discarded_nll = read_reals(r);
  const auto members = r.u32();
  if (members == 0 || members > 64) throw ParseError("model store: bad ensemble size");
  f.members.resize(members);
  for (auto& member : f.members) read_net(in, f.spec, member);

  auto& inv = m.inverse;
  inv.state_norm = nn::read_normalizer(in);
  read_net(in, inv.encoder_spec, inv.encoder);
  read_net(in, inv.decoder_spec, inv.decoder);

  auto& rw = m.reward;
  try {
    rw.kind = models::reward_kind_from_string(r.str());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("model store: ") + e.what());
  }
  rw.z_dim = static_cast<int>(r.u32());
  rw.input_norm = nn::read_normalizer(in);
  rw.reward_norm = nn::read_normalizer(in);
  read_net(in, rw.main_spec, rw.main);
  if (r.u8()) read_net(in, rw.aux_spec, rw.aux);
  return m;
}

}  // namespace ts::stitch
