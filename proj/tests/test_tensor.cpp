#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "protopop/error.hpp"
#include "protopop/tensor.hpp"
#include "support.hpp"

using namespace protopop;

TEST(Tensor, MatmulMatchesTripleLoop) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.index(6), k = 1 + rng.index(6), m = 1 + rng.index(6);
    Tensor a = testutil::random_tensor(n, k, rng), b = testutil::random_tensor(k, m, rng);
    Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0;
        for (std::size_t t = 0; t < k; ++t) s += a(i, t) * b(t, j);
        EXPECT_NEAR(c(i, j), s, 1e-12);
      }
    }
  }
}

TEST(Tensor, MatmulShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor(2, 3), Tensor(2, 3)), ShapeError);
}

TEST(Tensor, ConstructorRejectsWrongLength) {
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, CosineExamples) {
  const std::vector<double> x{1, 0}, y{0, 1}, z{1, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  EXPECT_NEAR(cosine_similarity(x, z), 1.0 / std::numbers::sqrt2, 1e-15);
  const std::vector<double> zero{0, 0};
  EXPECT_THROW(cosine_similarity(x, zero), NumericError);
}

TEST(Tensor, SoftmaxExample) {
  const std::vector<double> z{0.0, std::log(2.0)};
  auto p = softmax(z);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-15);
  EXPECT_THROW(softmax(z, 0.0), NumericError);
}

TEST(Tensor, SoftmaxLargeLogitsStayFinite) {
  const std::vector<double> z{1000.0, 999.0, -1000.0};
  auto p = softmax(z, 0.01);
  for (double v : p) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
}

TEST(Tensor, TransposeIsInvolution) {
  Rng rng(1);
  Tensor a = testutil::random_tensor(3, 5, rng);
  EXPECT_EQ(transpose(transpose(a)), a);
  EXPECT_EQ(transpose(a)(4, 2), a(2, 4));
}
