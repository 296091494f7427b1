#pragma once

#include <cstdint>
#include <vector>

#include "protopop/autodiff.hpp"

namespace protopop {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

// AdamW with decoupled weight decay:
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig config);

  // Applies one update from the current gradients. Does not clear them.
  void step();
  void zero_grad();

  std::int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  std::vector<Parameter*> params_;
  std::vector<Moments> moments_;
  AdamWConfig config_;
  std::int64_t step_ = 0;
};

}  // namespace protopop
