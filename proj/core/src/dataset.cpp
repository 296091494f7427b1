#include "protopop/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/random.hpp"

namespace protopop {

using nlohmann::json;
using nlohmann::ordered_json;

ClassTable::ClassTable(std::vector<ClassInfo> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const ClassInfo& a, const ClassInfo& b) { return a.index < b.index; });
  std::set<std::string> names;
  std::set<std::pair<std::string, std::string>> paths;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const ClassInfo& e = entries_[i];
    if (e.index != static_cast<int>(i)) {
      throw DataError("class indices must be dense 0..K-1; missing index " + std::to_string(i));
    }
    if (!names.insert(e.name).second) throw DataError("duplicate class name '" + e.name + "'");
    if (!paths.insert({e.parent1, e.parent2}).second) {
      throw DataError("duplicate class path '" + e.parent1 + "/" + e.parent2 + "'");
    }
  }
}

const ClassInfo& ClassTable::at(std::size_t index) const {
  if (index >= entries_.size()) throw DataError("class index " + std::to_string(index) + " out of range");
  return entries_[index];
}

std::optional<int> ClassTable::find(const std::string& level1, const std::string& level2) const {
  for (const ClassInfo& e : entries_)
    if (e.parent1 == level1 && e.parent2 == level2) return e.index;
  return std::nullopt;
}

std::vector<std::string> ClassTable::names() const {
  std::vector<std::string> out;
  for (const ClassInfo& e : entries_) out.push_back(e.name);
  return out;
}

std::string ClassTable::to_json() const {
  ordered_json arr = ordered_json::array();
  for (const ClassInfo& e : entries_) {
    arr.push_back({{"index", e.index}, {"name", e.name}, {"parent2", e.parent2}, {"parent1", e.parent1}});
  }
  return arr.dump(2) + "\n";
}

ClassTable ClassTable::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed class table: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("class table must be a JSON array");
  std::vector<ClassInfo> entries;
  for (const auto& item : doc) {
    try {
      entries.push_back({item.at("index").get<int>(), item.at("name").get<std::string>(),
                         item.at("parent2").get<std::string>(), item.at("parent1").get<std::string>()});
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed class entry: ") + e.what());
    }
  }
  return ClassTable(std::move(entries));
}

ClassTable ClassTable::read_json(const std::filesystem::path& path) { return from_json(read_file(path)); }

void ClassTable::write_json(const std::filesystem::path& path) const { write_file(path, to_json()); }

Dataset::Dataset(std::vector<PostRecord> posts, ClassTable classes)
    : posts_(std::move(posts)), classes_(std::move(classes)) {
  index_.reserve(posts_.size());
  for (std::size_t i = 0; i < posts_.size(); ++i) {
    const PostRecord& p = posts_[i];
    if (!index_.emplace(p.post_id, i).second) throw DataError("duplicate post_id '" + p.post_id + "'");
    if (p.class_index < 0 || static_cast<std::size_t>(p.class_index) >= classes_.size()) {
      throw DataError("post '" + p.post_id + "' has class_index " + std::to_string(p.class_index) +
                      " outside [0, " + std::to_string(classes_.size()) + ")");
    }
    const ClassInfo& c = classes_.at(p.class_index);
    if (c.parent1 != p.category.level1 || c.parent2 != p.category.level2) {
      throw DataError("post '" + p.post_id + "' category " + p.category.level1 + "/" + p.category.level2 +
                      " disagrees with class " + std::to_string(p.class_index) + " (" + c.parent1 + "/" +
                      c.parent2 + ")");
    }
    if (p.timestamp <= 0) throw DataError("post '" + p.post_id + "' has non-positive timestamp");
    if (!std::isfinite(p.popularity)) throw DataError("post '" + p.post_id + "' has non-finite popularity");
  }
}

const PostRecord& Dataset::get(const std::string& post_id) const {
  auto it = index_.find(post_id);
  if (it == index_.end()) throw DataError("unknown post_id '" + post_id + "'");
  return posts_[it->second];
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(posts_.size());
  for (const PostRecord& p : posts_) out.push_back(p.post_id);
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

namespace {

const std::set<std::string> kManifestKeys = {"post_id", "user_id",   "title",      "tags",     "category",
                                             "class_index", "timestamp", "popularity", "image_ref"};

PostRecord parse_line(const std::string& line, std::size_t line_no) {
  auto fail = [&](const std::string& why) -> DataError {
    return DataError("manifest line " + std::to_string(line_no) + ": " + why);
  };
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw fail(std::string("malformed JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) throw fail("expected a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kManifestKeys.count(key)) throw fail("unexpected field '" + key + "'");
  }
  for (const std::string& key : kManifestKeys) {
    if (!doc.contains(key)) throw fail("missing field '" + key + "'");
  }
  PostRecord p;
  try {
    p.post_id = doc["post_id"].get<std::string>();
    p.user_id = doc["user_id"].get<std::string>();
    p.title_tokens = tokenize(doc["title"].get<std::string>());
    p.tag_tokens = doc["tags"].get<std::vector<std::string>>();
    auto cat = doc["category"].get<std::vector<std::string>>();
    if (cat.size() != 3) throw fail("category must have exactly 3 levels");
    p.category = {cat[0], cat[1], cat[2]};
    p.class_index = doc["class_index"].get<int>();
    p.timestamp = doc["timestamp"].get<std::int64_t>();
    p.popularity = doc["popularity"].get<double>();
    p.image_ref = doc["image_ref"].get<std::string>();
  } catch (const json::exception& e) {
    throw fail(std::string("bad field type (") + e.what() + ")");
  }
  if (p.post_id.empty()) throw fail("empty post_id");
  return p;
}

ClassTable derive_classes(const std::vector<PostRecord>& posts) {
  std::set<std::pair<std::string, std::string>> paths;
  for (const PostRecord& p : posts) paths.insert({p.category.level1, p.category.level2});
  std::vector<ClassInfo> entries;
  int idx = 0;
  for (const auto& [l1, l2] : paths) entries.push_back({idx++, l2, l2, l1});
  return ClassTable(std::move(entries));
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& path, const std::optional<std::filesystem::path>& classes_path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<PostRecord> posts;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    PostRecord p = parse_line(line, line_no);
    if (!seen.insert(p.post_id).second) {
      throw DataError("manifest line " + std::to_string(line_no) + ": duplicate post_id '" + p.post_id + "'");
    }
    posts.push_back(std::move(p));
  }

  ClassTable classes;
  std::filesystem::path sibling = path.parent_path() / "classes.json";
  if (classes_path) {
    classes = ClassTable::read_json(*classes_path);
  } else if (std::filesystem::exists(sibling)) {
    classes = ClassTable::read_json(sibling);
  } else {
    classes = derive_classes(posts);
  }
  for (const PostRecord& p : posts) {
    if (!classes.find(p.category.level1, p.category.level2)) {
      throw DataError("post '" + p.post_id + "' has unknown category " + p.category.level1 + "/" +
                      p.category.level2);
    }
  }
  return Dataset(std::move(posts), std::move(classes));
}

std::string manifest_line(const PostRecord& p) {
  std::string title;
  for (std::size_t i = 0; i < p.title_tokens.size(); ++i) {
    if (i) title += ' ';
    title += p.title_tokens[i];
  }
  ordered_json doc;
  doc["post_id"] = p.post_id;
  doc["user_id"] = p.user_id;
  doc["title"] = title;
  doc["tags"] = p.tag_tokens;
  doc["category"] = {p.category.level1, p.category.level2, p.category.level3};
  doc["class_index"] = p.class_index;
  doc["timestamp"] = p.timestamp;
  doc["popularity"] = p.popularity;
  doc["image_ref"] = p.image_ref;
  return doc.dump();
}

void write_manifest(const std::filesystem::path& path, const Dataset& dataset) {
  std::string out;
  for (const PostRecord& p : dataset.posts()) {
    out += manifest_line(p);
    out += '\n';
  }
  write_file(path, out);
}

Split make_split(const Dataset& dataset, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  std::vector<std::string> ids = dataset.ids();
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, 0x5117));
  rng.shuffle(ids);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(ids.size())));
  Split split;
  split.validation.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace protopop
