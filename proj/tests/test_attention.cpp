#include <gtest/gtest.h>

#include "protopop/attention.hpp"
#include "protopop/error.hpp"
#include "support.hpp"

using namespace protopop;
using testutil::random_tensor;

namespace {

Tensor run(AttentionParams& params, const Tensor& x) {
  ad::Graph g;
  AttentionVars vars = bind(g, params);
  return multi_head_self_attention(g.constant(x), vars).value();
}

}  // namespace

TEST(Attention, SingleTokenIsResidualPlusValueOutput) {
  Rng rng(4);
  AttentionParams params = AttentionParams::init(8, 2, rng);
  for (double& b : params.value.bias.value.values()) b = rng.normal();
  Tensor x = random_tensor(1, 8, rng);
  // One key: the attention weight is 1, so Y = x + (x W_V + b_V) W_O.
  Tensor v = matmul(x, params.value.weight.value);
  for (std::size_t j = 0; j < v.cols(); ++j) v(0, j) += params.value.bias.value(0, j);
  Tensor expected = matmul(v, params.output.value);
  for (std::size_t j = 0; j < 8; ++j) expected(0, j) += x(0, j);
  Tensor y = run(params, x);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(y(0, j), expected(0, j), 1e-12);
}

TEST(Attention, PermutationEquivariant) {
  Rng rng(5);
  AttentionParams params = AttentionParams::init(8, 4, rng);
  Tensor x = random_tensor(5, 8, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Tensor px(5, 8);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) px(i, j) = x(perm[i], j);
  Tensor y = run(params, x), py = run(params, px);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(py(i, j), y(perm[i], j), 1e-12);
}

TEST(Attention, ZeroValueAndOutputIsPureResidual) {
  Rng rng(6);
  AttentionParams params = AttentionParams::init(8, 2, rng);
  params.value.weight.value.fill(0.0);
  params.value.bias.value.fill(0.0);
  params.output.value.fill(0.0);
  Tensor x = random_tensor(4, 8, rng);
  EXPECT_EQ(run(params, x), x);
}

TEST(Attention, HeadsMustDivideDim) {
  Rng rng(7);
  EXPECT_THROW(AttentionParams::init(10, 4, rng), ShapeError);
}

TEST(Attention, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    AttentionParams params = AttentionParams::init(4, 2, rng);
    for (double& b : params.query.bias.value.values()) b = 0.1 * rng.normal();
    Parameter x("x", random_tensor(3, 4, rng));
    Tensor w = random_tensor(3, 4, rng);
    std::vector<Parameter*> all = params.parameters();
    all.push_back(&x);
    const double err = testutil::gradient_check(all, [&](ad::Graph& g) {
      AttentionVars vars = bind(g, params);
      return ad::sum(ad::hadamard(multi_head_self_attention(g.parameter(x), vars), g.constant(w)));
    });
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}
