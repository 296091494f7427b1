#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "protopop/tensor.hpp"

namespace protopop {

// PEMB interchange format (little-endian):
//   "PEMB" | version u16 = 1 | kind u8 | dim u32 | count u64
//   per record: id_len u16 | id bytes | [kind 2: token_count u16] | f32 values
enum class EmbeddingKind : std::uint8_t { ImageGlobal = 0, TextGlobal = 1, TextTokens = 2 };

inline constexpr std::uint16_t kPembVersion = 1;

struct PembRecord {
  std::string id;
  Tensor values;  // 1 x dim for kinds 0/1, token_count x dim for kind 2
};

struct PembFile {
  EmbeddingKind kind = EmbeddingKind::ImageGlobal;
  std::uint32_t dim = 0;
  std::vector<PembRecord> records;
};

std::string encode_pemb(const PembFile& file);
PembFile decode_pemb(std::string_view bytes, const std::string& context = "PEMB file");
void write_pemb(const std::filesystem::path& path, const PembFile& file);
PembFile read_pemb(const std::filesystem::path& path);

struct TextEmbedding {
  std::vector<double> global;
  Tensor tokens;  // l x dim; l may be 0 for an empty text

  friend bool operator==(const TextEmbedding&, const TextEmbedding&) = default;
};

struct EmbeddingRecord {
  std::vector<double> image;
  TextEmbedding title;
  TextEmbedding tags;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

// Frozen encoder outputs keyed by post id, plus optional class-name token
// embeddings used to assemble prompts.
struct EmbeddingTable {
  std::size_t dim = 0;
  bool has_tags = false;
  std::map<std::string, EmbeddingRecord> records;
  std::map<std::string, std::vector<double>> class_tokens;

  // Throws FormatError on any vector whose length differs from dim.
  void validate() const;
  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

// Directory layout: image.pemb, text_global.pemb, text_tokens.pemb and, when
// present, tags_global.pemb, tags_tokens.pemb, class_tokens.pemb.
void write_embeddings(const std::filesystem::path& dir, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::filesystem::path& dir);

// Rounds every stored value to the nearest f32 so in-memory tables equal
// their file round trip.
void quantize_to_f32(EmbeddingTable& table);

}  // namespace protopop
