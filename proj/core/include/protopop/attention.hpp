#pragma once

#include <cstddef>
#include <vector>

#include "protopop/autodiff.hpp"
#include "protopop/random.hpp"

namespace protopop {

// Row-vector affine map y = x * weight + bias, weight is in x out.
struct Affine {
  Parameter weight;
  Parameter bias;

  static Affine init(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

struct AffineVars {
  ad::Var weight;
  ad::Var bias;
};

AffineVars bind(ad::Graph& graph, Affine& map);
ad::Var apply(const AffineVars& map, ad::Var x);

// Single residual multi-head self-attention block (no feed-forward, no norm):
//   Y = X + concat_h(softmax(Q_h K_h^T / sqrt(d_h)) V_h) * W_O
struct AttentionParams {
  Affine query;
  Affine key;
  Affine value;
  Parameter output;  // d x d, no bias
  std::size_t heads = 1;

  static AttentionParams init(std::size_t d, std::size_t heads, Rng& rng);
  std::size_t dim() const { return output.value.rows(); }
  std::vector<Parameter*> parameters();
};

struct AttentionVars {
  AffineVars query;
  AffineVars key;
  AffineVars value;
  ad::Var output;
  std::size_t heads = 1;
};

AttentionVars bind(ad::Graph& graph, AttentionParams& params);

// x is L x d. Throws ShapeError if d is not divisible by heads.
ad::Var multi_head_self_attention(ad::Var x, const AttentionVars& params);

}  // namespace protopop
