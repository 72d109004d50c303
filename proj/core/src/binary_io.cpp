#include "dmaddpg/binary_io.hpp"

#include <bit>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dmaddpg {

void BinaryWriter::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

void BinaryWriter::u32(std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out_.put(static_cast<char>((v >> shift) & 0xffu));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int shift = 0; shift < 64; shift += 8) out_.put(static_cast<char>((v >> shift) & 0xffu));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::f64s(std::span<const double> values) {
  u64(values.size());
  for (double v : values) f64(v);
}

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::magic(const char (&tag)[5]) { out_.write(tag, 4); }

void BinaryReader::read_bytes(unsigned char* dst, std::size_t n) {
  in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw std::runtime_error("binary container truncated");
  }
}

std::uint8_t BinaryReader::u8() {
  unsigned char b;
  read_bytes(&b, 1);
  return b;
}

std::uint32_t BinaryReader::u32() {
  unsigned char b[4];
  read_bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t BinaryReader::u64() {
  unsigned char b[8];
  read_bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

void BinaryReader::f64s(std::span<double> values) {
  const std::uint64_t n = u64();
  if (n != values.size()) throw std::runtime_error("binary container: array length mismatch");
  for (double& v : values) v = f64();
}

std::vector<double> BinaryReader::f64_vector() {
  const std::uint64_t n = u64();
  if (n > (std::uint64_t{1} << 34)) throw std::runtime_error("binary container: implausible array length");
  std::vector<double> values(n);
  for (double& v : values) v = f64();
  return values;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > (std::uint64_t{1} << 30)) throw std::runtime_error("binary container: implausible string length");
  std::string s(n, '\0');
  read_bytes(reinterpret_cast<unsigned char*>(s.data()), n);
  return s;
}

void BinaryReader::expect_magic(const char (&tag)[5]) {
  unsigned char b[4];
  read_bytes(b, 4);
  for (int i = 0; i < 4; ++i) {
    if (static_cast<char>(b[i]) != tag[i]) {
      throw std::runtime_error(std::string("binary container: expected tag ") + tag);
    }
  }
}

}  // namespace dmaddpg
