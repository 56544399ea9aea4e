#pragma once

#include <filesystem>
#include <iosfwd>

#include "tstitch/nn/mlp.hpp"

namespace ts::nn {

// Binary checkpoint: "TSNN", u32 version, u32 layer count + u32 sizes, u8 activation, u8 head,
// f64 bound, u64 step count, u64 parameter count, then params, adam_m, adam_v as f64.

void write_checkpoint(std::ostream& out, const MlpSpec& spec, const MlpState& state);
void read_checkpoint(std::istream& in, MlpSpec& spec, MlpState& state);

void save_checkpoint(const std::filesystem::path& path, const MlpSpec& spec,
                     const MlpState& state);
void load_checkpoint(const std::filesystem::path& path, MlpSpec& spec, MlpState& state);

void write_normalizer(std::ostream& out, const Normalizer& n);
Normalizer read_normalizer(std::istream& in);

}  // namespace ts::nn
