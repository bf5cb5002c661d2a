#include "sgcap/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sgcap/error.hpp"

namespace sgcap::io {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> b) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

std::span<const std::uint8_t> ByteReader::take(std::size_t n, const char* what) {
  if (n > remaining()) {
    throw FormatError("truncated file: expected " + std::to_string(n) + " bytes for " + what +
                      " at offset " + std::to_string(pos_) + ", " + std::to_string(remaining()) +
                      " left");
  }
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint16_t ByteReader::u16(const char* what) { return get_le<std::uint16_t>(take(2, what)); }
std::uint32_t ByteReader::u32(const char* what) { return get_le<std::uint32_t>(take(4, what)); }
std::uint64_t ByteReader::u64(const char* what) { return get_le<std::uint64_t>(take(8, what)); }
float ByteReader::f32(const char* what) {
  return std::bit_cast<float>(get_le<std::uint32_t>(take(4, what)));
}

std::string ByteReader::bytes(std::size_t n, const char* what) {
  auto s = take(n, what);
  return std::string(s.begin(), s.end());
}

void ByteReader::expect_magic(std::string_view tag, const char* format_name) {
  if (remaining() < tag.size() || std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    throw FormatError(std::string("bad magic: not a ") + format_name + " file");
  }
  pos_ += tag.size();
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace sgcap::io
