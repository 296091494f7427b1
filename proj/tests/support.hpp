#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <string>
#include <vector>

#include "protopop/autodiff.hpp"
#include "protopop/dataset.hpp"
#include "protopop/random.hpp"
#include "protopop/tensor.hpp"

namespace protopop::testutil {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
// gradient is ~0 from dividing roundoff by roundoff: a central difference at
// h = 1e-5 on an O(1) loss carries ~1e-10 of cancellation noise.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Max relative error between backprop gradients and central differences of
// `loss` over every entry of every parameter.
inline double gradient_check(const std::vector<Parameter*>& params, const std::function<ad::Var(ad::Graph&)>& loss,
                             double h = 1e-5) {
  {
    ad::Graph g;
    g.backward(loss(g));
  }
  auto eval = [&] {
    ad::Graph g;
    return loss(g).scalar();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = eval();
      p->value[i] = saved - h;
      const double down = eval();
      p->value[i] = saved;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

inline PostRecord make_post(const std::string& id, const std::string& user, int class_index, const std::string& l1,
                            const std::string& l2, std::int64_t ts, double popularity) {
  PostRecord p;
  p.post_id = id;
  p.user_id = user;
  p.class_index = class_index;
  p.category = {l1, l2, l2 + "_x"};
  p.timestamp = ts;
  p.popularity = popularity;
  p.title_tokens = {"a", "b"};
  p.tag_tokens = {"t"};
  p.image_ref = id + ".jpg";
  return p;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("protopop_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace protopop::testutil
