#include <gtest/gtest.h>

#include "protopop/optim.hpp"

using namespace protopop;

TEST(AdamW, FirstStepMatchesClosedForm) {
  Parameter p("p", Tensor(1, 1, 1.0));
  p.grad[0] = 0.5;
  AdamW opt({&p}, AdamWConfig{});
  opt.step();
  // m_hat = g, v_hat = g^2, so the Adam term is lr * g / (|g| + eps).
  const double expected = 1.0 - 1e-4 * 0.5 / (0.5 + 1e-8) - 1e-4 * 1e-5 * 1.0;
  EXPECT_NEAR(p.value[0], expected, 1e-15);
}

TEST(AdamW, UnitGradientFirstStep) {
  Parameter p("p", Tensor(1, 1, 1.0));
  p.grad[0] = 1.0;
  AdamW opt({&p}, AdamWConfig{});
  opt.step();
  EXPECT_NEAR(p.value[0], 1.0 - 1e-4 / (1.0 + 1e-8) - 1e-9, 1e-15);
}

TEST(AdamW, ZeroGradientIsPureShrink) {
  Parameter p("p", Tensor(1, 3, 2.0));
  AdamW opt({&p}, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
  opt.step();
  for (double v : p.value.values()) EXPECT_DOUBLE_EQ(v, 2.0 * (1.0 - 0.1 * 0.01));
}

TEST(AdamW, ZeroLearningRateLeavesParameters) {
  Parameter p("p", Tensor(2, 2, 0.3));
  p.grad.fill(4.0);
  AdamW opt({&p}, AdamWConfig{0.0, 0.9, 0.999, 1e-8, 1e-5});
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_EQ(p.value, Tensor(2, 2, 0.3));
}

TEST(AdamW, ZeroGradClearsGradients) {
  Parameter p("p", Tensor(1, 2, 0.0));
  p.grad.fill(3.0);
  AdamW opt({&p}, AdamWConfig{});
  opt.zero_grad();
  EXPECT_EQ(p.grad, Tensor(1, 2, 0.0));
}

TEST(AdamW, MinimizesQuadratic) {
  Parameter p("p", Tensor(1, 1, 5.0));
  AdamW opt({&p}, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 500; ++i) {
    p.grad[0] = 2 * (p.value[0] - 1.0);
    opt.step();
  }
  EXPECT_NEAR(p.value[0], 1.0, 1e-2);
}
