#include <gtest/gtest.h>

#include <cmath>

#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/gbdt.hpp"
#include "protopop/metrics.hpp"
#include "support.hpp"

using namespace protopop;

namespace {

double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double walk(const Tree& tree, std::span<const double> row) {
  std::size_t n = 0;
  while (tree.nodes[n].feature >= 0) {
    const TreeNode& node = tree.nodes[n];
    n = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return tree.nodes[n].value;
}

struct Problem {
  Tensor x;
  std::vector<double> y;
};

Problem linear_problem(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Problem p{testutil::random_tensor(n, 3, rng), {}};
  for (std::size_t i = 0; i < n; ++i) p.y.push_back(p.x(i, 0) + 2.0 * p.x(i, 1));
  return p;
}

}  // namespace

TEST(GbdtConfig, Validation) {
  EXPECT_NO_THROW(GbdtConfig::config_a().validate());
  EXPECT_NO_THROW(GbdtConfig::config_b().validate());
  GbdtConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GbdtConfig{};
  c.feature_subsample = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GbdtConfig{};
  c.min_leaf = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(GbdtConfig::config_a().max_depth, 6u);
  EXPECT_EQ(GbdtConfig::config_b().rounds, 500u);
}

TEST(Gbdt, ConstantLabels) {
  Rng rng(1);
  Tensor x = testutil::random_tensor(40, 3, rng);
  std::vector<double> y(40, 7.25);
  std::vector<double> trace;
  Forest f = fit_gbdt(x, y, GbdtConfig{.rounds = 5}, &trace);
  EXPECT_EQ(f.base_score, 7.25);
  for (const Tree& t : f.trees) EXPECT_EQ(t.nodes.size(), 1u);
  for (double p : f.predict(x)) EXPECT_EQ(p, 7.25);
  EXPECT_EQ(trace.back(), 0.0);
}

TEST(Gbdt, StepFunctionRecoveredByOneSplit) {
  Tensor x(20, 1);
  std::vector<double> y;
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i);
    y.push_back(i < 13 ? 1.0 : 5.0);
  }
  // Oracle: the SSE-minimizing cut over all 19 candidate positions.
  double best_sse = 1e300;
  std::size_t best_cut = 0;
  for (std::size_t cut = 1; cut < 20; ++cut) {
    double ml = 0, mr = 0;
    for (std::size_t i = 0; i < cut; ++i) ml += y[i] / cut;
    for (std::size_t i = cut; i < 20; ++i) mr += y[i] / (20 - cut);
    double sse = 0;
    for (std::size_t i = 0; i < 20; ++i) sse += std::pow(y[i] - (i < cut ? ml : mr), 2);
    if (sse < best_sse) best_sse = sse, best_cut = cut;
  }
  ASSERT_EQ(best_cut, 13u);
  Forest f = fit_gbdt(x, y, GbdtConfig{.rounds = 1, .max_depth = 1, .min_leaf = 1, .learning_rate = 1.0,
                                       .feature_subsample = 1.0});
  ASSERT_EQ(f.trees.size(), 1u);
  EXPECT_EQ(f.trees[0].nodes[0].feature, 0);
  EXPECT_EQ(f.trees[0].nodes[0].threshold, 12.5);
  const auto pred = f.predict(x);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(pred[i], y[i], 1e-12);
}

TEST(Gbdt, LinearTargetFitsAndMseIsMonotone) {
  // Features uniform on [0, 1].
  Rng rng(0);
  Problem p{Tensor(500, 2), {}};
  for (std::size_t i = 0; i < 500; ++i) {
    p.x(i, 0) = rng.uniform();
    p.x(i, 1) = rng.uniform();
    p.y.push_back(p.x(i, 0) + 2.0 * p.x(i, 1));
  }
  std::vector<double> trace;
  Forest f = fit_gbdt(p.x, p.y, GbdtConfig{.rounds = 300, .max_depth = 3, .learning_rate = 0.1,
                                           .feature_subsample = 1.0},
                      &trace);
  ASSERT_EQ(trace.size(), 301u);
  EXPECT_LT(trace.back(), 1e-3);
  EXPECT_NEAR(trace.back(), mse(f.predict(p.x), p.y), 1e-9);
  for (std::size_t r = 1; r < trace.size(); ++r) EXPECT_LE(trace[r], trace[r - 1]);
}

TEST(Gbdt, MonotoneUnderFeatureSubsampling) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Problem p = linear_problem(200, seed);
    std::vector<double> trace;
    fit_gbdt(p.x, p.y, GbdtConfig{.rounds = 50, .max_depth = 4, .feature_subsample = 0.5, .seed = seed}, &trace);
    for (std::size_t r = 1; r < trace.size(); ++r) EXPECT_LE(trace[r], trace[r - 1]);
  }
}

TEST(Gbdt, DeterministicGivenSeed) {
  Problem p = linear_problem(300, 4);
  const GbdtConfig cfg{.rounds = 30, .max_depth = 4, .feature_subsample = 0.6, .seed = 17};
  EXPECT_EQ(fit_gbdt(p.x, p.y, cfg), fit_gbdt(p.x, p.y, cfg));
}

TEST(Gbdt, PredictionMatchesTraversal) {
  Problem p = linear_problem(300, 5);
  Forest f = fit_gbdt(p.x, p.y, GbdtConfig{.rounds = 20, .max_depth = 5});
  Rng rng(9);
  Tensor probe = testutil::random_tensor(100, 3, rng);
  const auto pred = f.predict(probe);
  for (std::size_t i = 0; i < 100; ++i) {
    double expect = f.base_score;
    for (const Tree& t : f.trees) expect += f.learning_rate * walk(t, probe.row(i));
    EXPECT_NEAR(pred[i], expect, 1e-12);
    EXPECT_EQ(pred[i], f.predict_row(probe.row(i)));
  }
}

TEST(Gbdt, PiecewiseConstant) {
  Problem p = linear_problem(200, 6);
  Forest f = fit_gbdt(p.x, p.y, GbdtConfig{.rounds = 10, .max_depth = 3});
  // Feature 2 carries no signal; moving it within a gap between thresholds
  // never changes the prediction.
  std::vector<double> cuts{-1e300, 1e300};
  for (const Tree& t : f.trees)
    for (const TreeNode& n : t.nodes)
      if (n.feature == 2) cuts.push_back(n.threshold);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> row{0.3, -0.2, 0.0};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] < 1e-9 || std::abs(cuts[k]) > 1e100 || std::abs(cuts[k + 1]) > 1e100) continue;
    row[2] = cuts[k] + 0.25 * (cuts[k + 1] - cuts[k]);
    const double a = f.predict_row(row);
    row[2] = cuts[k] + 0.75 * (cuts[k + 1] - cuts[k]);
    EXPECT_EQ(a, f.predict_row(row));
  }
}

TEST(Gbdt, EmptyAndSingleLeafForests) {
  Forest f{.features = 2, .base_score = 3.5, .learning_rate = 1.0, .tag = "A", .trees = {}};
  Tensor x = Tensor::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(f.predict(x), (std::vector<double>{3.5, 3.5}));
  f.trees.push_back(Tree{{TreeNode{.value = 0.25}}});
  EXPECT_EQ(f.predict(x), (std::vector<double>{3.75, 3.75}));
  EXPECT_THROW(f.predict(Tensor(1, 3)), ShapeError);
  Problem p = linear_problem(50, 1);
  Forest zero = fit_gbdt(p.x, p.y, GbdtConfig{.rounds = 0});
  double mean = 0;
  for (double v : p.y) mean += v / 50.0;
  EXPECT_NEAR(zero.base_score, mean, 1e-12);
  for (double v : zero.predict(p.x)) EXPECT_EQ(v, zero.base_score);
}

TEST(Gbdt, InputErrors) {
  Problem p = linear_problem(9, 1);
  EXPECT_THROW(fit_gbdt(p.x, p.y, GbdtConfig{}), DataError);  // 9 < 2 * 5
  Problem q = linear_problem(20, 1);
  q.x(3, 1) = std::nan("");
  EXPECT_THROW(fit_gbdt(q.x, q.y, GbdtConfig{}), NumericError);
  std::vector<double> short_y(5, 1.0);
  EXPECT_THROW(fit_gbdt(q.x, short_y, GbdtConfig{}), ShapeError);
}

TEST(Oversample, Examples) {
  const std::vector<double> labels{5, 13, 12.5};
  EXPECT_EQ(oversample_tail(labels, 12, 2), (std::vector<std::size_t>{0, 1, 2, 1, 2}));
  EXPECT_EQ(oversample_tail(labels, 12, 1), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(oversample_tail(labels, 100, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(oversample_tail(labels, 12, 3).size(), 7u);
  EXPECT_THROW(oversample_tail(labels, 12, 0), ConfigError);
}

TEST(Fuse, PerfectMemberWins) {
  Rng rng(2);
  std::vector<double> y(200), b(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = rng.normal(), b[i] = rng.normal();
  EXPECT_EQ(fuse_predictions(y, b, y).w, 1.0);
}

TEST(Fuse, IdenticalMembersPickZero) {
  Rng rng(3);
  std::vector<double> y(100), a(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = rng.normal(), a[i] = y[i] + rng.normal();
  const FusionWeights fw = fuse_predictions(a, a, y);
  EXPECT_EQ(fw.w, 0.0);
  EXPECT_EQ(blend(0.0, a, a), a);
}

TEST(Fuse, AveragingIndependentErrorsBeatsBothMembers) {
  Rng rng(0);
  const std::size_t n = 10000;
  std::vector<double> y(n), a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.normal();
    a[i] = y[i] + rng.normal();
    b[i] = y[i] + rng.normal();
  }
  const FusionWeights fw = fuse_predictions(a, b, y);
  const double fused = mae(blend(fw.w, a, b), y);
  EXPECT_LT(fused, std::min(mae(a, y), mae(b, y)));
  EXPECT_NEAR(fw.mae, fused, 1e-12);
}

TEST(Fuse, ExhaustiveOverGrid) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> y(300), a(300), b(300);
    for (std::size_t i = 0; i < 300; ++i) {
      y[i] = rng.normal();
      a[i] = y[i] + 2.0 * rng.normal();
      b[i] = y[i] + 0.7 * rng.normal();
    }
    const FusionWeights fw = fuse_predictions(a, b, y);
    for (int k = 0; k <= 20; ++k) {
      EXPECT_LE(spearman(blend(k * 0.05, a, b), y), fw.src + 1e-15);
    }
    EXPECT_GE(fw.w, 0.0);
    EXPECT_LE(fw.w, 1.0);
  }
  std::vector<double> x3(3), x2(2);
  EXPECT_THROW(fuse_predictions(x3, x2, x3), ShapeError);
}

TEST(ForestIo, RoundTripAndCorruption) {
  testutil::TempDir dir("forest");
  Problem p = linear_problem(100, 3);
  Forest f = fit_gbdt(p.x, p.y, GbdtConfig{.rounds = 15, .max_depth = 3, .tag = "B"});
  save_forest(dir.path() / "f.pfst", f);
  EXPECT_EQ(load_forest(dir.path() / "f.pfst"), f);
  std::string bytes = encode_forest(f);
  EXPECT_EQ(decode_forest(bytes), f);
  EXPECT_THROW(decode_forest(std::string_view(bytes).substr(0, bytes.size() - 3)), FormatError);
  bytes[1] = '?';
  EXPECT_THROW(decode_forest(bytes), FormatError);
}

TEST(PredictionsCsv, RoundTripIsExact) {
  testutil::TempDir dir("preds");
  const std::vector<std::string> ids{"p1", "p2", "p3"};
  const std::vector<double> values{0.1, 1.0 / 3.0, -2.5e-17};
  write_predictions(dir.path() / "p.csv", ids, values);
  const auto back = read_predictions(dir.path() / "p.csv");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].first, ids[i]);
    EXPECT_EQ(back[i].second, values[i]);
  }
  write_file(dir.path() / "bad.csv", "post_id,prediction\np1,abc\n");
  EXPECT_THROW(read_predictions(dir.path() / "bad.csv"), FormatError);
}
