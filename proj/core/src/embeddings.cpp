#include "protopop/embeddings.hpp"

#include <cmath>
#include <set>

#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"

namespace protopop {

namespace fs = std::filesystem;

std::string encode_pemb(const PembFile& file) {
  if (static_cast<std::uint8_t>(file.kind) > 2) throw FormatError("unknown PEMB kind");
  BinaryWriter w;
  w.bytes("PEMB");
  w.u16(kPembVersion);
  w.u8(static_cast<std::uint8_t>(file.kind));
  w.u32(file.dim);
  w.u64(file.records.size());
  for (const PembRecord& r : file.records) {
    w.short_string(r.id);
    if (r.values.cols() != file.dim) {
      throw FormatError("dim disagreement: record '" + r.id + "' has width " + std::to_string(r.values.cols()) +
                        ", file dim is " + std::to_string(file.dim));
    }
    if (file.kind == EmbeddingKind::TextTokens) {
      if (r.values.rows() > 0xFFFF) throw FormatError("record '" + r.id + "' has more than 65535 tokens");
      w.u16(static_cast<std::uint16_t>(r.values.rows()));
    } else if (r.values.rows() != 1) {
      throw FormatError("record '" + r.id + "' must be a single vector for a global-embedding file");
    }
    for (double v : r.values.values()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

PembFile decode_pemb(std::string_view bytes, const std::string& context) {
  BinaryReader r(bytes, context);
  if (r.remaining() < 4 || r.bytes(4) != "PEMB") throw FormatError(context + ": bad magic");
  const std::uint16_t version = r.u16();
  if (version != kPembVersion) {
    throw FormatError(context + ": version mismatch (file " + std::to_string(version) + ", expected " +
                      std::to_string(kPembVersion) + ")");
  }
  const std::uint8_t kind = r.u8();
  if (kind > 2) throw FormatError(context + ": unknown kind " + std::to_string(kind));
  PembFile file;
  file.kind = static_cast<EmbeddingKind>(kind);
  file.dim = r.u32();
  const std::uint64_t count = r.u64();
  std::set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    PembRecord rec;
    rec.id = r.short_string();
    if (!seen.insert(rec.id).second) throw FormatError(context + ": duplicate id '" + rec.id + "'");
    std::size_t rows = 1;
    if (file.kind == EmbeddingKind::TextTokens) rows = r.u16();
    const std::size_t n = rows * file.dim;
    if (r.remaining() < n * 4) throw FormatError("truncated " + context + " in record '" + rec.id + "'");
    std::vector<double> values(n);
    for (double& v : values) {
      v = static_cast<double>(r.f32());
      if (!std::isfinite(v)) throw FormatError(context + ": non-finite value in record '" + rec.id + "'");
    }
    rec.values = Tensor(rows, file.dim, std::move(values));
    file.records.push_back(std::move(rec));
  }
  if (!r.at_end()) throw FormatError(context + ": trailing bytes after " + std::to_string(count) + " records");
  return file;
}

void write_pemb(const fs::path& path, const PembFile& file) { write_file(path, encode_pemb(file)); }

PembFile read_pemb(const fs::path& path) { return decode_pemb(read_file(path), path.filename().string()); }

void EmbeddingTable::validate() const {
  auto check = [&](std::size_t n, const std::string& what) {
    if (n != dim) {
      throw FormatError("dim disagreement: " + what + " has width " + std::to_string(n) + ", table dim is " +
                        std::to_string(dim));
    }
  };
  for (const auto& [id, rec] : records) {
    check(rec.image.size(), "image vector of '" + id + "'");
    check(rec.title.global.size(), "title embedding of '" + id + "'");
    if (!rec.title.tokens.empty()) check(rec.title.tokens.cols(), "title tokens of '" + id + "'");
    if (has_tags) {
      check(rec.tags.global.size(), "tag embedding of '" + id + "'");
      if (!rec.tags.tokens.empty()) check(rec.tags.tokens.cols(), "tag tokens of '" + id + "'");
    }
  }
  for (const auto& [name, vec] : class_tokens) check(vec.size(), "class token of '" + name + "'");
}

namespace {

PembFile globals(const EmbeddingTable& t, EmbeddingKind kind, auto&& pick) {
  PembFile f;
  f.kind = kind;
  f.dim = static_cast<std::uint32_t>(t.dim);
  for (const auto& [id, rec] : t.records) f.records.push_back({id, Tensor::row_vector(pick(rec))});
  return f;
}

PembFile tokens(const EmbeddingTable& t, auto&& pick) {
  PembFile f;
  f.kind = EmbeddingKind::TextTokens;
  f.dim = static_cast<std::uint32_t>(t.dim);
  for (const auto& [id, rec] : t.records) {
    const Tensor& tok = pick(rec);
    f.records.push_back({id, tok.empty() ? Tensor(0, t.dim) : tok});
  }
  return f;
}

PembFile expect(const fs::path& path, EmbeddingKind kind) {
  PembFile f = read_pemb(path);
  if (f.kind != kind) {
    throw FormatError(path.filename().string() + ": expected kind " + std::to_string(static_cast<int>(kind)) +
                      ", found " + std::to_string(static_cast<int>(f.kind)));
  }
  return f;
}

std::vector<double> as_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

void write_embeddings(const fs::path& dir, const EmbeddingTable& table) {
  table.validate();
  fs::create_directories(dir);
  write_pemb(dir / "image.pemb", globals(table, EmbeddingKind::ImageGlobal,
                                         [](const EmbeddingRecord& r) -> const std::vector<double>& { return r.image; }));
  write_pemb(dir / "text_global.pemb",
             globals(table, EmbeddingKind::TextGlobal,
                     [](const EmbeddingRecord& r) -> const std::vector<double>& { return r.title.global; }));
  write_pemb(dir / "text_tokens.pemb",
             tokens(table, [](const EmbeddingRecord& r) -> const Tensor& { return r.title.tokens; }));
  if (table.has_tags) {
    write_pemb(dir / "tags_global.pemb",
               globals(table, EmbeddingKind::TextGlobal,
                       [](const EmbeddingRecord& r) -> const std::vector<double>& { return r.tags.global; }));
    write_pemb(dir / "tags_tokens.pemb",
               tokens(table, [](const EmbeddingRecord& r) -> const Tensor& { return r.tags.tokens; }));
  }
  if (!table.class_tokens.empty()) {
    PembFile f;
    f.kind = EmbeddingKind::TextGlobal;
    f.dim = static_cast<std::uint32_t>(table.dim);
    for (const auto& [name, vec] : table.class_tokens) f.records.push_back({name, Tensor::row_vector(vec)});
    write_pemb(dir / "class_tokens.pemb", f);
  }
}

EmbeddingTable read_embeddings(const fs::path& dir) {
  PembFile image = expect(dir / "image.pemb", EmbeddingKind::ImageGlobal);
  PembFile text_global = expect(dir / "text_global.pemb", EmbeddingKind::TextGlobal);
  PembFile text_tokens = expect(dir / "text_tokens.pemb", EmbeddingKind::TextTokens);

  EmbeddingTable table;
  table.dim = image.dim;
  auto same_dim = [&](const PembFile& f, const std::string& name) {
    if (f.dim != table.dim) {
      throw FormatError("dim disagreement: " + name + " has dim " + std::to_string(f.dim) + ", image.pemb has " +
                        std::to_string(table.dim));
    }
  };
  same_dim(text_global, "text_global.pemb");
  same_dim(text_tokens, "text_tokens.pemb");

  for (PembRecord& r : image.records) table.records[r.id].image = as_vector(r.values);
  auto attach = [&](PembFile& f, const std::string& name, auto&& assign) {
    if (f.records.size() != table.records.size()) {
      throw FormatError(name + " has " + std::to_string(f.records.size()) + " records, image.pemb has " +
                        std::to_string(table.records.size()));
    }
    for (PembRecord& r : f.records) {
      auto it = table.records.find(r.id);
      if (it == table.records.end()) throw FormatError(name + ": id '" + r.id + "' missing from image.pemb");
      assign(it->second, r.values);
    }
  };
  attach(text_global, "text_global.pemb", [](EmbeddingRecord& rec, Tensor& v) { rec.title.global = as_vector(v); });
  attach(text_tokens, "text_tokens.pemb", [](EmbeddingRecord& rec, Tensor& v) { rec.title.tokens = std::move(v); });

  if (fs::exists(dir / "tags_global.pemb") && fs::exists(dir / "tags_tokens.pemb")) {
    PembFile tags_global = expect(dir / "tags_global.pemb", EmbeddingKind::TextGlobal);
    PembFile tags_tokens = expect(dir / "tags_tokens.pemb", EmbeddingKind::TextTokens);
    same_dim(tags_global, "tags_global.pemb");
    same_dim(tags_tokens, "tags_tokens.pemb");
    attach(tags_global, "tags_global.pemb", [](EmbeddingRecord& rec, Tensor& v) { rec.tags.global = as_vector(v); });
    attach(tags_tokens, "tags_tokens.pemb", [](EmbeddingRecord& rec, Tensor& v) { rec.tags.tokens = std::move(v); });
    table.has_tags = true;
  }
  if (fs::exists(dir / "class_tokens.pemb")) {
    PembFile classes = expect(dir / "class_tokens.pemb", EmbeddingKind::TextGlobal);
    same_dim(classes, "class_tokens.pemb");
    for (PembRecord& r : classes.records) table.class_tokens[r.id] = as_vector(r.values);
  }
  table.validate();
  return table;
}

void quantize_to_f32(EmbeddingTable& table) {
  auto q = [](double& v) { v = static_cast<double>(static_cast<float>(v)); };
  for (auto& [id, rec] : table.records) {
    for (double& v : rec.image) q(v);
    for (double& v : rec.title.global) q(v);
    for (double& v : rec.title.tokens.values()) q(v);
    for (double& v : rec.tags.global) q(v);
    for (double& v : rec.tags.tokens.values()) q(v);
  }
  for (auto& [name, vec] : table.class_tokens)
    for (double& v : vec) q(v);
}

}  // namespace protopop
