#include <gtest/gtest.h>

#include <fstream>

#include "protopop/binary_io.hpp"
#include "protopop/dataset.hpp"
#include "protopop/error.hpp"
#include "support.hpp"

using namespace protopop;

namespace {

std::string line(const std::string& id, const std::string& l2 = "dog") {
  return R"({"post_id":")" + id +
         R"(","user_id":"u1","title":"a  small dog","tags":["pet","cute"],"category":["animal",")" + l2 +
         R"(","puppy"],"class_index":0,"timestamp":1500000000,"popularity":7.5,"image_ref":"x.jpg"})";
}

std::string expect_data_error(const std::filesystem::path& path) {
  try {
    load_manifest(path);
  } catch (const DataError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected DataError";
  return "";
}

}  // namespace

TEST(Manifest, EmptyFileGivesEmptyDataset) {
  testutil::TempDir dir("manifest_empty");
  write_file(dir.path() / "m.jsonl", "");
  Dataset d = load_manifest(dir.path() / "m.jsonl");
  EXPECT_TRUE(d.posts().empty());
}

TEST(Manifest, ParsesFields) {
  testutil::TempDir dir("manifest_parse");
  write_file(dir.path() / "m.jsonl", line("p1") + "\n" + line("p2") + "\n");
  Dataset d = load_manifest(dir.path() / "m.jsonl");
  ASSERT_EQ(d.posts().size(), 2u);
  const PostRecord& p = d.get("p1");
  EXPECT_EQ(p.title_tokens, (std::vector<std::string>{"a", "small", "dog"}));
  EXPECT_EQ(p.tag_tokens.size(), 2u);
  EXPECT_EQ(p.category.level3, "puppy");
  EXPECT_EQ(d.classes().size(), 1u);
  EXPECT_EQ(d.classes().at(0).name, "dog");
}

TEST(Manifest, DuplicateIdNamesTheId) {
  testutil::TempDir dir("manifest_dup");
  write_file(dir.path() / "m.jsonl", line("p1") + "\n" + line("dup7") + "\n" + line("dup7") + "\n");
  const std::string msg = expect_data_error(dir.path() / "m.jsonl");
  EXPECT_NE(msg.find("dup7"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Manifest, MalformedLineReportsLineNumber) {
  testutil::TempDir dir("manifest_bad");
  write_file(dir.path() / "m.jsonl", line("p1") + "\n" + line("p2") + "\n{not json\n");
  const std::string msg = expect_data_error(dir.path() / "m.jsonl");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Manifest, MissingAndExtraFieldsRejected) {
  testutil::TempDir dir("manifest_fields");
  write_file(dir.path() / "a.jsonl", R"({"post_id":"p"})" "\n");
  EXPECT_NE(expect_data_error(dir.path() / "a.jsonl").find("missing field"), std::string::npos);
  std::string extra = line("p1");
  extra.insert(extra.size() - 1, R"(,"geo":1)");
  write_file(dir.path() / "b.jsonl", extra + "\n");
  EXPECT_NE(expect_data_error(dir.path() / "b.jsonl").find("unexpected field"), std::string::npos);
}

TEST(Manifest, UnknownCategoryAgainstClassTable) {
  testutil::TempDir dir("manifest_cls");
  write_file(dir.path() / "m.jsonl", line("p1", "cat") + "\n");
  ClassTable({{0, "dog", "dog", "animal"}}).write_json(dir.path() / "classes.json");
  EXPECT_THROW(load_manifest(dir.path() / "m.jsonl"), DataError);
}

TEST(Manifest, RoundTrip) {
  testutil::TempDir dir("manifest_rt");
  std::vector<PostRecord> posts = {testutil::make_post("a", "u", 0, "g", "x", 10, 1.25),
                                   testutil::make_post("b", "v", 1, "g", "y", 20, 2.5)};
  Dataset d(posts, ClassTable({{0, "x", "x", "g"}, {1, "y", "y", "g"}}));
  write_manifest(dir.path() / "m.jsonl", d);
  d.classes().write_json(dir.path() / "classes.json");
  Dataset back = load_manifest(dir.path() / "m.jsonl");
  EXPECT_EQ(back.posts(), d.posts());
  EXPECT_EQ(back.classes(), d.classes());
}

TEST(Dataset, ValidatesRecords) {
  ClassTable classes({{0, "x", "x", "g"}});
  EXPECT_THROW(Dataset({testutil::make_post("a", "u", 1, "g", "x", 10, 1)}, classes), DataError);
  EXPECT_THROW(Dataset({testutil::make_post("a", "u", 0, "g", "z", 10, 1)}, classes), DataError);
  EXPECT_THROW(Dataset({testutil::make_post("a", "u", 0, "g", "x", 0, 1)}, classes), DataError);
  Dataset ok({testutil::make_post("a", "u", 0, "g", "x", 10, 1)}, classes);
  EXPECT_THROW(ok.get("nope"), DataError);
}

TEST(ClassTable, RejectsGapsAndDuplicates) {
  EXPECT_THROW(ClassTable({{1, "x", "x", "g"}}), DataError);
  EXPECT_THROW(ClassTable({{0, "x", "x", "g"}, {1, "x", "y", "g"}}), DataError);
  EXPECT_THROW(ClassTable({{0, "x", "x", "g"}, {1, "y", "x", "g"}}), DataError);
  ClassTable t({{0, "x", "x", "g"}, {1, "y", "y", "g"}});
  EXPECT_EQ(ClassTable::from_json(t.to_json()), t);
}

TEST(Split, DeterministicDisjointAndSized) {
  std::vector<PostRecord> posts;
  for (int i = 0; i < 50; ++i) posts.push_back(testutil::make_post("p" + std::to_string(i), "u", 0, "g", "x", 10, i));
  Dataset d(posts, ClassTable({{0, "x", "x", "g"}}));
  Split a = make_split(d, 0.2, 3), b = make_split(d, 0.2, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation.size(), 10u);
  EXPECT_EQ(a.train.size(), 40u);
  for (const auto& id : a.validation) EXPECT_FALSE(std::binary_search(a.train.begin(), a.train.end(), id));
  EXPECT_NE(make_split(d, 0.2, 4).validation, a.validation);
}

TEST(Tokenize, SplitsOnWhitespace) {
  EXPECT_EQ(tokenize("  a\tb  c\n"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(tokenize("   ").empty());
}
