#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace ts {

/// Shortest decimal that parses back to the same double.
std::string format_real(double v);

/// 64-bit FNV-1a; used for config hashes and per-stream seed derivation.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Mixes a base seed with stream coordinates into an independent seed (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Little-endian primitive writer; throws on stream failure.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void bytes(const char* data, std::size_t n);
  void u8(std::uint8_t v) { put(v, 1); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v);
  void str(std::string_view s);

 private:
  void put(std::uint64_t v, int width);
  std::ostream& out_;
};

/// Little-endian primitive reader; throws ParseError on truncated input.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}
  void bytes(char* data, std::size_t n);
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64();
  std::string str();

 private:
  std::uint64_t get(int width);
  std::istream& in_;
};

}  // namespace ts
