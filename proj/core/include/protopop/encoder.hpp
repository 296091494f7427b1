#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "protopop/embeddings.hpp"
#include "protopop/tensor.hpp"

namespace protopop {

enum class TextSource { Title, AllTags };

TextSource parse_text_source(const std::string& name);
std::string to_string(TextSource source);

struct TextEncoding {
  Tensor global;  // 1 x d_enc
  Tensor tokens;  // l x d_enc, l >= 1
  // Set when the stored sequence was empty and a single pad token was
  // synthesized from the global embedding.
  bool padded = false;
};

// Frozen encoder contract: repeated calls with the same arguments return
// identical values and every output is finite. Implementations are read-only
// after construction and safe to query concurrently.
class EncoderProvider {
 public:
  virtual ~EncoderProvider() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t token_dim() const = 0;

  virtual Tensor encode_image(const std::string& post_id) const = 0;
  virtual TextEncoding encode_text(const std::string& post_id, TextSource source) const = 0;
  virtual bool has_text_source(TextSource source) const = 0;
  virtual bool has_class_tokens() const = 0;
  // K x token_dim token embeddings of the class names.
  virtual Tensor class_token_embeddings(std::span<const std::string> class_names) const = 0;
  // Fixed token_dim x dim map applied after mean-pooling a prompt sequence.
  virtual Tensor composition_map() const = 0;
};

// Provider backed by an EmbeddingTable, either produced by the synthetic
// generator or read from PEMB files written by an external exporter. The
// composition map is the identity, so token_dim == dim.
class TableEncoder final : public EncoderProvider {
 public:
  explicit TableEncoder(std::shared_ptr<const EmbeddingTable> table);
  static TableEncoder from_directory(const std::filesystem::path& dir);

  std::size_t dim() const override { return table_->dim; }
  std::size_t token_dim() const override { return table_->dim; }
  Tensor encode_image(const std::string& post_id) const override;
  TextEncoding encode_text(const std::string& post_id, TextSource source) const override;
  bool has_text_source(TextSource source) const override {
    return source == TextSource::Title || table_->has_tags;
  }
  bool has_class_tokens() const override { return !table_->class_tokens.empty(); }
  Tensor class_token_embeddings(std::span<const std::string> class_names) const override;
  Tensor composition_map() const override { return Tensor::identity(table_->dim); }

  const EmbeddingTable& table() const { return *table_; }

 private:
  const EmbeddingRecord& record(const std::string& post_id) const;
  std::shared_ptr<const EmbeddingTable> table_;
};

}  // namespace protopop
