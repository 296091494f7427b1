#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protopop/error.hpp"
#include "protopop/prompt.hpp"
#include "support.hpp"

using namespace protopop;

namespace {

// Tokens H and a single local embedding L with cos(H_j, L) = sims[j].
std::pair<Tensor, Tensor> with_similarities(const std::vector<double>& sims) {
  const std::size_t d = sims.size() + 1;
  Tensor tokens(sims.size(), d);
  for (std::size_t j = 0; j < sims.size(); ++j) {
    tokens(j, 0) = sims[j];
    tokens(j, j + 1) = std::sqrt(1.0 - sims[j] * sims[j]);
  }
  Tensor local(1, d);
  local(0, 0) = 1.0;
  return {tokens, local};
}

// Softmax-weighted average written out directly.
double local_oracle(const std::vector<double>& sims, double tau) {
  const double m = *std::max_element(sims.begin(), sims.end());
  double z = 0.0, acc = 0.0;
  for (double s : sims) {
    const double w = std::exp((s - m) / tau);
    z += w;
    acc += w * s;
  }
  return acc / z;
}

PromptBank random_bank(std::size_t s, std::size_t k, std::size_t d, Rng& rng) {
  return PromptBank::init(s, testutil::random_tensor(k, d, rng), rng, 0.3);
}

}  // namespace

TEST(LocalScore, WorkedExample) {
  auto [tokens, local] = with_similarities({0.2, 0.4});
  EXPECT_NEAR(local_score(tokens, local, 0.1)[0], 0.37616, 1e-5);
  const double w0 = std::exp(2.0) / (std::exp(2.0) + std::exp(4.0));
  EXPECT_NEAR(w0, 0.11920, 1e-5);
  EXPECT_NEAR(1.0 - w0, 0.88080, 1e-5);
}

TEST(LocalScore, TemperatureLimits) {
  auto [tokens, local] = with_similarities({0.2, 0.4});
  EXPECT_NEAR(local_score(tokens, local, 1e-4)[0], 0.4, 1e-6);
  EXPECT_NEAR(local_score(tokens, local, 1e6)[0], 0.3, 1e-6);
}

TEST(LocalScore, NonPositiveTemperatureThrows) {
  auto [tokens, local] = with_similarities({0.2, 0.4});
  EXPECT_THROW(local_score(tokens, local, 0.0), NumericError);
  EXPECT_THROW(local_score(tokens, local, -1.0), NumericError);
}

TEST(LocalScore, MatchesOracleAndBrackets) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t l = 1 + rng.index(6);
    std::vector<double> sims(l);
    for (double& s : sims) s = testutil::uniform(rng, -0.99, 0.99);
    auto [tokens, local] = with_similarities(sims);
    const double tau = std::exp(testutil::uniform(rng, -6.0, 4.0));
    const double got = local_score(tokens, local, tau)[0];
    EXPECT_NEAR(got, local_oracle(sims, tau), 1e-12);
    const double mean = std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(l);
    EXPECT_GE(got, mean - 1e-12);
    EXPECT_LE(got, *std::max_element(sims.begin(), sims.end()) + 1e-12);
  }
}

TEST(LocalScore, TokenPermutationInvariant) {
  Rng rng(5);
  Tensor tokens = testutil::random_tensor(5, 4, rng);
  Tensor local = testutil::random_tensor(3, 4, rng);
  Tensor flipped(5, 4);
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t k = 0; k < 4; ++k) flipped(j, k) = tokens(4 - j, k);
  const auto a = local_score(tokens, local, 0.1);
  const auto b = local_score(flipped, local, 0.1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(GlobalScore, Examples) {
  Rng rng(3);
  Tensor g = testutil::random_tensor(4, 6, rng);
  Tensor h(1, 6);
  for (std::size_t k = 0; k < 6; ++k) h(0, k) = g(2, k);
  auto p = global_score(h, g);
  EXPECT_NEAR(p[2], 1.0, 1e-14);
  EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 2);

  Tensor basis = Tensor::from_rows({{1, 0, 0}, {0, 1, 0}});
  Tensor ortho = Tensor::from_rows({{0, 0, 2}});
  for (double v : global_score(ortho, basis)) EXPECT_EQ(v, 0.0);
}

TEST(GlobalScore, MatchesCosineOracleAndIsScaleInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor g = testutil::random_tensor(5, 7, rng);
    Tensor h = testutil::random_tensor(1, 7, rng);
    auto p = global_score(h, g);
    Tensor h2 = h;
    for (double& v : h2.values()) v *= 3.7;
    auto p2 = global_score(h2, g);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(p[i], cosine_similarity(h.row(0), g.row(i)), 1e-12);
      EXPECT_NEAR(p[i], p2[i], 1e-12);
    }
  }
}

TEST(GlobalScore, ZeroNormThrows) {
  Tensor g = Tensor::from_rows({{1, 0}});
  Tensor h(1, 2);
  EXPECT_THROW(global_score(h, g), NumericError);
}

TEST(ClassEmbeddings, ZeroContextIsPaddedMean) {
  Rng rng(8);
  PromptBank bank = random_bank(3, 4, 5, rng);
  bank.global_context.value.fill(0.0);
  Tensor map = testutil::random_tensor(5, 6, rng);
  ad::Graph g;
  auto embeds = class_embeddings(g, bank, map);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 5; ++k) expect += bank.class_tokens(i, k) / 4.0 * map(k, c);
      EXPECT_NEAR(embeds.global.value()(i, c), expect, 1e-12);
    }
}

TEST(ClassEmbeddings, GlobalContextDoesNotTouchLocal) {
  Rng rng(9);
  PromptBank bank = random_bank(2, 3, 4, rng);
  const Tensor map = Tensor::identity(4);
  ad::Graph g1;
  auto before = class_embeddings(g1, bank, map);
  bank.global_context.value(0, 1) += 0.5;
  ad::Graph g2;
  auto after = class_embeddings(g2, bank, map);
  EXPECT_NE(before.global.value(), after.global.value());
  EXPECT_EQ(before.local.value(), after.local.value());
}

TEST(ClassEmbeddings, ShapeMismatchThrows) {
  Rng rng(1);
  PromptBank bank = random_bank(2, 3, 4, rng);
  ad::Graph g;
  EXPECT_THROW(class_embeddings(g, bank, Tensor::identity(5)), ShapeError);
}

TEST(ClassEmbeddings, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    PromptBank bank = random_bank(3, 4, 5, rng);
    const Tensor map = testutil::random_tensor(5, 6, rng);
    const Tensor weights = testutil::random_tensor(4, 6, rng);
    const Tensor h = testutil::random_tensor(1, 6, rng);
    const Tensor tokens = testutil::random_tensor(3, 6, rng);
    const std::size_t label = rng.index(4);
    auto loss = [&](ad::Graph& g) {
      auto e = class_embeddings(g, bank, map);
      auto p = global_score(g.constant(h), e.global);
      auto pl = local_score(g.constant(tokens), e.local, 0.1);
      auto losses = prompt_losses(p, pl, label, 0.07);
      auto probe = ad::sum(ad::hadamard(e.global, g.constant(weights)));
      return ad::add(ad::add(losses.global, losses.local), probe);
    };
    for (Parameter* p : bank.parameters()) p->zero_grad();
    EXPECT_LT(testutil::gradient_check(bank.parameters(), loss), 1e-4) << "seed " << seed;
  }
}

TEST(PromptLosses, UniformScoresGiveLogK) {
  ad::Graph g;
  auto p = g.constant(Tensor(1, 5, 0.3));
  auto losses = prompt_losses(p, p, 2, 0.07);
  EXPECT_NEAR(losses.global.scalar(), std::log(5.0), 1e-12);
  EXPECT_NEAR(losses.local.scalar(), std::log(5.0), 1e-12);
}

TEST(PromptLosses, ConfidentCorrectScoreGivesNearZero) {
  ad::Graph g;
  auto p = g.constant(Tensor::from_rows({{-1, 1, -1}}));
  auto losses = prompt_losses(p, p, 1, 0.01);
  EXPECT_LT(losses.global.scalar(), 1e-12);
  EXPECT_GE(losses.global.scalar(), 0.0);
}

TEST(PromptLosses, GradientWrtScoresMatchesSoftmaxMinusOneHot) {
  Parameter p("p", Tensor::from_rows({{0.1, -0.4, 0.7, 0.2}}));
  p.grad = Tensor(1, 4);
  auto loss = [&](ad::Graph& g) {
    auto v = g.parameter(p);
    return prompt_losses(v, v, 3, 0.07).global;
  };
  EXPECT_LT(testutil::gradient_check({&p}, loss), 1e-4);
}

TEST(PromptLosses, BadInputsThrow) {
  ad::Graph g;
  auto p = g.constant(Tensor(1, 3, 0.1));
  EXPECT_THROW(prompt_losses(p, p, 3, 0.07), Error);
  EXPECT_THROW(prompt_losses(p, p, 0, 0.0), NumericError);
}
