#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dmaddpg {

// Little-endian byte streams shared by every on-disk container. Values are
// encoded byte-by-byte, so files are identical on big- and little-endian hosts.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void f64s(std::span<const double> values);
  void str(const std::string& s);
  void magic(const char (&tag)[5]);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  void f64s(std::span<double> values);
  std::vector<double> f64_vector();
  std::string str();
  // Throws std::runtime_error if the next four bytes differ from `tag`.
  void expect_magic(const char (&tag)[5]);

 private:
  void read_bytes(unsigned char* dst, std::size_t n);
  std::istream& in_;
};

}  // namespace dmaddpg
