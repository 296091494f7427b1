#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace protopop {

// Three-level category path: level1 is the coarse category, level2 the
// fine-grained subcategory that defines a class, level3 the subtopic used for
// semantic diversity during prototype sampling.
struct CategoryPath {
  std::string level1;
  std::string level2;
  std::string level3;

  friend bool operator==(const CategoryPath&, const CategoryPath&) = default;
};

struct PostRecord {
  std::string post_id;
  std::string user_id;
  std::vector<std::string> title_tokens;
  std::vector<std::string> tag_tokens;
  CategoryPath category;
  int class_index = 0;
  std::int64_t timestamp = 0;
  double popularity = 0.0;
  std::string image_ref;

  friend bool operator==(const PostRecord&, const PostRecord&) = default;
};

// One class of the classification task. `name` is the text fed to the class
// token embedder; (parent1, parent2) must equal the first two levels of the
// category path of every post carrying this class.
struct ClassInfo {
  int index = 0;
  std::string name;
  std::string parent2;
  std::string parent1;

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

class ClassTable {
 public:
  ClassTable() = default;
  // Validates dense indices 0..K-1, unique names and unique (parent1, parent2).
  explicit ClassTable(std::vector<ClassInfo> entries);

  std::size_t size() const { return entries_.size(); }
  const ClassInfo& at(std::size_t index) const;
  const std::vector<ClassInfo>& entries() const { return entries_; }
  std::optional<int> find(const std::string& level1, const std::string& level2) const;
  std::vector<std::string> names() const;

  static ClassTable read_json(const std::filesystem::path& path);
  void write_json(const std::filesystem::path& path) const;
  std::string to_json() const;
  static ClassTable from_json(const std::string& text);

  friend bool operator==(const ClassTable& a, const ClassTable& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<ClassInfo> entries_;
};

class Dataset {
 public:
  Dataset() = default;
  // Validates unique post ids, class indices in range and consistent with the
  // category path, and positive timestamps.
  Dataset(std::vector<PostRecord> posts, ClassTable classes);

  const std::vector<PostRecord>& posts() const { return posts_; }
  const ClassTable& classes() const { return classes_; }
  std::size_t size() const { return posts_.size(); }
  bool contains(const std::string& post_id) const { return index_.count(post_id) != 0; }
  // Throws DataError for an unknown id.
  const PostRecord& get(const std::string& post_id) const;
  std::vector<std::string> ids() const;

 private:
  std::vector<PostRecord> posts_;
  ClassTable classes_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads a JSONL manifest. The class table comes from `classes_path` when
// given, else from classes.json beside the manifest when present, else it is
// derived from the distinct (level1, level2) pairs in sorted order, in which
// case each line's class_index must match the derived table.
Dataset load_manifest(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& classes_path = std::nullopt);
void write_manifest(const std::filesystem::path& path, const Dataset& dataset);
std::string manifest_line(const PostRecord& post);

// Whitespace tokenization used for the manifest's title string.
std::vector<std::string> tokenize(const std::string& text);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

// Seeded shuffle of the sorted ids; the first round(val_fraction * n) go to
// validation. Both lists are returned sorted.
Split make_split(const Dataset& dataset, double val_fraction, std::uint64_t seed);

}  // namespace protopop
