#include "protopop/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "protopop/error.hpp"

namespace protopop {

void BinaryWriter::put(std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::short_string(std::string_view s) {
  if (s.size() > 0xFFFF) throw FormatError("string of " + std::to_string(s.size()) + " bytes exceeds u16 length");
  u16(static_cast<std::uint16_t>(s.size()));
  bytes(s);
}

void BinaryWriter::long_string(std::string_view s) {
  u64(s.size());
  bytes(s);
}

std::uint64_t BinaryReader::get(int width) {
  if (remaining() < static_cast<std::size_t>(width)) {
    throw FormatError("truncated " + context_ + " at byte " + std::to_string(pos_));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += width;
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string_view BinaryReader::bytes(std::size_t n) {
  if (remaining() < n) throw FormatError("truncated " + context_ + " at byte " + std::to_string(pos_));
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::string BinaryReader::short_string() { return std::string(bytes(u16())); }

std::string BinaryReader::long_string() {
  const std::uint64_t n = u64();
  if (n > remaining()) throw FormatError("truncated " + context_ + " at byte " + std::to_string(pos_));
  return std::string(bytes(static_cast<std::size_t>(n)));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace protopop
