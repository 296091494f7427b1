#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/trainer.hpp"

namespace protopop {

namespace {

struct Block {
  const char* name;
  std::size_t size;
};

std::vector<Block> blocks(const FeatureLayout& l) {
  return {{"image", l.encoder_dim},     {"text", l.encoder_dim},      {"global_sims", l.classes},
          {"local_sims", l.classes},    {"fused", l.fusion_dim},      {"prob_visual", l.classes},
          {"prob_textual", l.classes},  {"user_stats", kUserStatsWidth}};
}

}  // namespace

std::vector<std::string> FeatureLayout::column_names() const {
  std::vector<std::string> out;
  out.reserve(width());
  for (const Block& b : blocks(*this)) {
    for (std::size_t i = 0; i < b.size; ++i) {
      if (std::string(b.name) == "user_stats") {
        out.emplace_back(kUserStatsNames[i]);
      } else {
        out.push_back(std::string(b.name) + "_" + std::to_string(i));
      }
    }
  }
  return out;
}

std::size_t FeatureLayout::offset_of(const std::string& block) const {
  std::size_t offset = 0;
  for (const Block& b : blocks(*this)) {
    if (block == b.name) return offset;
    offset += b.size;
  }
  throw ConfigError("unknown feature block '" + block + "'");
}

std::size_t FeatureLayout::size_of(const std::string& block) const {
  for (const Block& b : blocks(*this))
    if (block == b.name) return b.size;
  throw ConfigError("unknown feature block '" + block + "'");
}

std::size_t FeatureTable::row_of(const std::string& id) const {
  // Ids are usually sorted; fall back to a scan otherwise.
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it != ids.end() && *it == id) return static_cast<std::size_t>(it - ids.begin());
  auto lin = std::find(ids.begin(), ids.end(), id);
  if (lin == ids.end()) throw DataError("feature table has no row for post_id '" + id + "'");
  return static_cast<std::size_t>(lin - ids.begin());
}

FeatureTable FeatureTable::subset(std::span<const std::string> row_ids,
                                  std::span<const std::size_t> column_indices) const {
  for (std::size_t c : column_indices) {
    if (c >= width()) throw ShapeError("feature column " + std::to_string(c) + " out of range");
  }
  FeatureTable out;
  out.ids.assign(row_ids.begin(), row_ids.end());
  for (std::size_t c : column_indices) out.columns.push_back(columns[c]);
  out.values = Tensor(row_ids.size(), column_indices.size());
  for (std::size_t r = 0; r < row_ids.size(); ++r) {
    auto src = values.row(row_of(row_ids[r]));
    auto dst = out.values.row(r);
    for (std::size_t k = 0; k < column_indices.size(); ++k) dst[k] = src[column_indices[k]];
  }
  return out;
}

FeatureTable FeatureTable::rows(std::span<const std::string> row_ids) const {
  std::vector<std::size_t> all(width());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return subset(row_ids, all);
}

void FeatureTable::write(const std::filesystem::path& path, const std::filesystem::path& ids_path) const {
  if (values.rows() != ids.size() || values.cols() != columns.size()) {
    throw ShapeError("feature table shape " + values.shape_string() + " disagrees with its ids/columns");
  }
  BinaryWriter w;
  w.bytes("PFEAT1 " + std::to_string(ids.size()) + " " + std::to_string(columns.size()) + "\n");
  std::string header;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) header += ',';
    header += columns[c];
  }
  w.bytes(header + "\n");
  for (double v : values.values()) w.f32(static_cast<float>(v));
  write_file(path, w.buffer());
  std::string id_text;
  for (const std::string& id : ids) id_text += id + "\n";
  write_file(ids_path, id_text);
}

FeatureTable FeatureTable::read(const std::filesystem::path& path, const std::filesystem::path& ids_path) {
  const std::string bytes = read_file(path);
  const std::string name = path.filename().string();
  auto line_end = bytes.find('\n');
  if (bytes.rfind("PFEAT1 ", 0) != 0 || line_end == std::string::npos) {
    throw FormatError("feature file " + name + ": bad magic");
  }
  std::size_t rows = 0, cols = 0;
  {
    std::istringstream in(bytes.substr(7, line_end - 7));
    if (!(in >> rows >> cols)) throw FormatError("feature file " + name + ": malformed header");
  }
  auto header_end = bytes.find('\n', line_end + 1);
  if (header_end == std::string::npos) throw FormatError("feature file " + name + ": truncated column names");
  FeatureTable t;
  {
    std::string cols_line = bytes.substr(line_end + 1, header_end - line_end - 1);
    std::stringstream in(cols_line);
    std::string col;
    while (std::getline(in, col, ',')) t.columns.push_back(col);
  }
  if (t.columns.size() != cols) throw FormatError("feature file " + name + ": column count disagrees with header");
  BinaryReader r(std::string_view(bytes).substr(header_end + 1), "feature file " + name);
  std::vector<double> values(rows * cols);
  for (double& v : values) v = static_cast<double>(r.f32());
  if (!r.at_end()) throw FormatError("feature file " + name + ": trailing bytes");
  t.values = Tensor(rows, cols, std::move(values));

  std::istringstream ids_in(read_file(ids_path));
  std::string id;
  while (std::getline(ids_in, id)) {
    if (!id.empty()) t.ids.push_back(id);
  }
  if (t.ids.size() != rows) {
    throw FormatError("feature id file lists " + std::to_string(t.ids.size()) + " ids for " + std::to_string(rows) +
                      " rows");
  }
  return t;
}

}  // namespace protopop
