#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "protopop/error.hpp"
#include "protopop/metrics.hpp"
#include "support.hpp"

using namespace protopop;

namespace {

// Brute-force ranking: each value's rank is 1 + (#smaller) + (#equal - 1) / 2.
std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) less += w < v[i], equal += w == v[i];
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Dataset three_class_dataset() {
  std::vector<PostRecord> posts;
  posts.push_back(testutil::make_post("a1", "u", 0, "g", "a", 1, 1.0));
  posts.push_back(testutil::make_post("a2", "u", 0, "g", "a", 2, 2.0));
  posts.push_back(testutil::make_post("a3", "u", 0, "g", "a", 3, 3.0));
  posts.push_back(testutil::make_post("b1", "u", 1, "g", "b", 4, 5.0));
  posts.push_back(testutil::make_post("c1", "u", 2, "g", "c", 5, 9.0));
  return Dataset(posts, ClassTable({{0, "a", "a", "g"}, {1, "b", "b", "g"}, {2, "c", "c", "g"}}));
}

}  // namespace

TEST(Spearman, Examples) {
  const std::vector<double> y{1, 2, 3}, yh{1, 3, 2};
  EXPECT_EQ(spearman(yh, y), 0.5);
  const std::vector<double> up{0.1, 0.5, 2.0, 7.0}, down{7.0, 2.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(spearman(up, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman(down, up), -1.0);
}

TEST(Spearman, MatchesRankThenPearsonWithTies) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(40);
    std::vector<double> a(n), b(n);
    const std::size_t levels = 1 + rng.index(6);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.index(levels + 2));
      b[i] = rng.uniform() < 0.5 ? static_cast<double>(rng.index(levels)) : rng.normal();
    }
    const auto ra = brute_ranks(a), rb = brute_ranks(b);
    EXPECT_EQ(average_ranks(a), ra);
    const bool constant = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; }) ||
                          std::all_of(b.begin(), b.end(), [&](double v) { return v == b[0]; });
    if (constant) {
      EXPECT_THROW(spearman(a, b), NumericError);
      EXPECT_FALSE(try_spearman(a, b).has_value());
      continue;
    }
    EXPECT_NEAR(spearman(a, b), pearson(ra, rb), 1e-12);
  }
}

TEST(Spearman, Errors) {
  const std::vector<double> one{1.0}, two{1.0, 2.0}, three{1, 2, 3};
  EXPECT_THROW(spearman(one, one), DataError);
  EXPECT_THROW(spearman(two, three), DataError);
  const std::vector<double> bad{1.0, std::nan("")};
  EXPECT_THROW(spearman(bad, two), NumericError);
}

TEST(Mae, Examples) {
  const std::vector<double> y{1, 2}, yh{2, 4};
  EXPECT_EQ(mae(yh, y), 1.5);
  EXPECT_EQ(mae(y, y), 0.0);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(100), b(100);
    double oracle = 0;
    for (std::size_t i = 0; i < 100; ++i) a[i] = rng.normal(), b[i] = rng.normal();
    for (std::size_t i = 0; i < 100; ++i) oracle += std::abs(a[i] - b[i]);
    EXPECT_NEAR(mae(a, b), oracle / 100.0, 1e-12);
  }
  EXPECT_THROW(mae(y, std::vector<double>{1.0}), DataError);
}

TEST(Report, PerClassBreakdown) {
  const Dataset ds = three_class_dataset();
  const std::map<std::string, double> preds{{"a1", 1.5}, {"a2", 1.0}, {"a3", 4.0}, {"b1", 4.0}, {"c1", 9.0}};
  const EvalReport r = per_class_report(ds, preds);
  EXPECT_EQ(r.count, 5u);
  ASSERT_EQ(r.per_class.size(), 3u);
  std::size_t total = 0;
  for (const auto& c : r.per_class) total += c.count;
  EXPECT_EQ(total, r.count);
  EXPECT_EQ(r.per_class[0].name, "a");
  EXPECT_EQ(r.per_class[0].src, 0.5);
  EXPECT_FALSE(r.per_class[1].src.has_value());
  EXPECT_EQ(r.per_class[1].mae, 1.0);
  EXPECT_NEAR(r.mae, (0.5 + 1.0 + 1.0 + 1.0 + 0.0) / 5.0, 1e-15);
  const std::string json = r.to_json();
  EXPECT_NE(json.find("\"src\": null"), std::string::npos);
  EXPECT_NE(r.to_table().find("n/a"), std::string::npos);
}

TEST(Report, SingleClassEqualsOverall) {
  const Dataset ds = three_class_dataset();
  const std::map<std::string, double> preds{{"a1", 3.0}, {"a2", 1.0}, {"a3", 2.0}};
  const EvalReport r = per_class_report(ds, preds);
  ASSERT_EQ(r.per_class.size(), 1u);
  EXPECT_EQ(r.per_class[0].src, r.src);
  EXPECT_EQ(r.per_class[0].mae, r.mae);
}

TEST(Report, UnknownIdThrows) {
  const Dataset ds = three_class_dataset();
  EXPECT_THROW(per_class_report(ds, {{"zzz", 1.0}, {"a1", 2.0}}), DataError);
}
