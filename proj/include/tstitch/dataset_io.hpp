#pragma once

#include <filesystem>
#include <iosfwd>

#include "tstitch/data.hpp"

namespace ts {

// Text form:
//   TSDS v1 dS=<int> dA=<int>
//   # <key>=<value>                                  (optional provenance lines)
//   <traj_id> <step> <s...> <a...> <r> <s'...> <0|1>  (one line per transition)
//
// Binary form (little endian): "TSDS", u32 version=1, u32 dS, u32 dA, u64 trajectory count,
// then per trajectory u64 id, u64 length and per transition the f64 fields in order with the
// terminal flag as u8. Provenance follows as u64 count and length-prefixed key/value pairs.

void write_text(std::ostream& out, const Dataset& dataset);
Dataset read_text(std::istream& in);

void write_binary(std::ostream& out, const Dataset& dataset);
Dataset read_binary(std::istream& in);

/// Chooses the form from the extension: ".txt"/".tsds.txt" is text, anything else binary.
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace ts
