#include "tstitch/io_util.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>

#include "tstitch/errors.hpp"

namespace ts {

std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

void BinaryWriter::bytes(const char* data, std::size_t n) {
  out_.write(data, static_cast<std::streamsize>(n));
  if (!out_) throw std::runtime_error("binary write failed");
}

void BinaryWriter::put(std::uint64_t v, int width) {
  std::array<char, 8> buf{};
  for (int i = 0; i < width; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  bytes(buf.data(), static_cast<std::size_t>(width));
}

void BinaryWriter::f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  bytes(s.data(), s.size());
}

void BinaryReader::bytes(char* data, std::size_t n) {
  in_.read(data, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError("truncated binary input");
}

std::uint64_t BinaryReader::get(int width) {
  std::array<unsigned char, 8> buf{};
  bytes(reinterpret_cast<char*>(buf.data()), static_cast<std::size_t>(width));
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(get(8)); }

std::string BinaryReader::str() {
  const auto n = u64();
  if (n > (1ULL << 30)) throw ParseError("string length out of range");
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

}  // namespace ts
