#include "protopop/optim.hpp"

#include <cmath>

#include "protopop/error.hpp"

namespace protopop {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  moments_.reserve(params_.size());
  for (Parameter* p : params_) {
    moments_.push_back({Tensor(p->value.rows(), p->value.cols()), Tensor(p->value.rows(), p->value.cols())});
  }
}

void AdamW::step() {
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.requires_grad) continue;
    if (!p.grad.same_shape(p.value)) {
      throw ShapeError("AdamW: gradient shape " + p.grad.shape_string() + " does not match parameter " +
                       p.name + " " + p.value.shape_string());
    }
    Moments& mom = moments_[k];
    auto theta = p.value.values();
    auto g = p.grad.values();
    auto m = mom.m.values();
    auto v = mom.v.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      const double decay = config_.lr * config_.weight_decay * theta[i];
      theta[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps) + decay;
    }
    if (!p.value.all_finite()) throw NumericError("AdamW produced non-finite values in " + p.name);
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace protopop
