#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pmn::io {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void string16(const std::string& s);  // u16 length + bytes
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source; throws DataError on truncation.
class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::string origin) : buf_(buf), origin_(std::move(origin)) {}
  void bytes(void* out, std::size_t n);
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  std::string string16();
  std::string string(std::size_t n);
  std::size_t remaining() const { return buf_.size() - pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::vector<char>& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what);

std::vector<char> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it into place.
void write_file(const std::filesystem::path& path, const std::vector<char>& data);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest text that parses back to the same value.
std::string format_float(float v);
std::string format_float(double v);

}  // namespace pmn::io
