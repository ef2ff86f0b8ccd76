#include "pmn/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pmn/errors.hpp"

namespace pmn::io {

namespace {

template <typename U>
void put_le(std::vector<char>& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void ByteWriter::bytes(const void* data, std::size_t n) {
  const char* p = static_cast<const char*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void ByteWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::string16(const std::string& s) {
  if (s.size() > 0xFFFF) throw DataError("string too long for u16 length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  bytes(s.data(), s.size());
}

void ByteReader::bytes(void* out, std::size_t n) {
  if (remaining() < n) {
    throw DataError(origin_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) + ")");
  }
  std::memcpy(out, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint16_t ByteReader::u16() {
  unsigned char b[2];
  bytes(b, 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t ByteReader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::string16() { return string(u16()); }

std::string ByteReader::string(std::size_t n) {
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFULL) throw DataError(std::string(what) + " exceeds u32 range");
  return static_cast<std::uint32_t>(v);
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  return {buf.begin(), buf.end()};
}

void write_file(const std::filesystem::path& path, const std::vector<char>& data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::string format_float(float v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string format_float(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace pmn::io
