#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace protopop {

// Little-endian encoder into an in-memory buffer.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view data) { buffer_.append(data); }
  // u16 length prefix followed by the bytes. Throws FormatError above 65535.
  void short_string(std::string_view s);
  void long_string(std::string_view s);

  const std::string& buffer() const { return buffer_; }
  std::string take() { return std::move(buffer_); }

 private:
  void put(std::uint64_t v, int width);
  std::string buffer_;
};

// Little-endian decoder over a byte buffer. Reading past the end throws
// FormatError("truncated ...").
class BinaryReader {
 public:
  BinaryReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);
  std::string short_string();
  std::string long_string();

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::uint64_t get(int width);
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace protopop
