#include "protopop/encoder.hpp"

#include "protopop/error.hpp"

namespace protopop {

TextSource parse_text_source(const std::string& name) {
  if (name == "title") return TextSource::Title;
  if (name == "alltags") return TextSource::AllTags;
  throw ConfigError("unknown text source '" + name + "' (expected title|alltags)");
}

std::string to_string(TextSource source) { return source == TextSource::Title ? "title" : "alltags"; }

TableEncoder::TableEncoder(std::shared_ptr<const EmbeddingTable> table) : table_(std::move(table)) {
  if (!table_) throw DataError("TableEncoder requires an embedding table");
  table_->validate();
}

TableEncoder TableEncoder::from_directory(const std::filesystem::path& dir) {
  return TableEncoder(std::make_shared<const EmbeddingTable>(read_embeddings(dir)));
}

const EmbeddingRecord& TableEncoder::record(const std::string& post_id) const {
  auto it = table_->records.find(post_id);
  if (it == table_->records.end()) throw DataError("no embeddings for post_id '" + post_id + "'");
  return it->second;
}

Tensor TableEncoder::encode_image(const std::string& post_id) const {
  return Tensor::row_vector(record(post_id).image);
}

TextEncoding TableEncoder::encode_text(const std::string& post_id, TextSource source) const {
  const EmbeddingRecord& rec = record(post_id);
  if (source == TextSource::AllTags && !table_->has_tags) {
    throw DataError("embedding table has no tag embeddings for source alltags");
  }
  const TextEmbedding& text = source == TextSource::Title ? rec.title : rec.tags;
  TextEncoding out;
  out.global = Tensor::row_vector(text.global);
  if (text.tokens.rows() > 0) {
    out.tokens = text.tokens;
    return out;
  }
  if (l2_norm(text.global) == 0.0) {
    throw DataError("empty token sequence for post_id '" + post_id + "' and no usable global embedding");
  }
  out.tokens = out.global;
  out.padded = true;
  return out;
}

Tensor TableEncoder::class_token_embeddings(std::span<const std::string> class_names) const {
  Tensor out(class_names.size(), table_->dim);
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    auto it = table_->class_tokens.find(class_names[i]);
    if (it == table_->class_tokens.end()) {
      throw DataError("no class token embedding for class '" + class_names[i] + "'");
    }
    std::copy(it->second.begin(), it->second.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace protopop
