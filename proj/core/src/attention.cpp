#include "protopop/attention.hpp"

#include <cmath>

#include "protopop/error.hpp"

namespace protopop {

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace

Affine Affine::init(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
  return Affine{Parameter(name + ".weight", gaussian(in, out, stddev, rng)),
                Parameter(name + ".bias", Tensor(1, out))};
}

AffineVars bind(ad::Graph& graph, Affine& map) {
  return {graph.parameter(map.weight), graph.parameter(map.bias)};
}

ad::Var apply(const AffineVars& map, ad::Var x) {
  return ad::add_row(ad::matmul(x, map.weight), map.bias);
}

AttentionParams AttentionParams::init(std::size_t d, std::size_t heads, Rng& rng) {
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention dim " + std::to_string(d) + " is not divisible by " +
                     std::to_string(heads) + " heads");
  }
  AttentionParams p;
  p.query = Affine::init("attn.query", d, d, rng);
  p.key = Affine::init("attn.key", d, d, rng);
  p.value = Affine::init("attn.value", d, d, rng);
  p.output = Parameter("attn.output", gaussian(d, d, 1.0 / std::sqrt(static_cast<double>(d)), rng));
  p.heads = heads;
  return p;
}

std::vector<Parameter*> AttentionParams::parameters() {
  return {&query.weight, &query.bias, &key.weight, &key.bias, &value.weight, &value.bias, &output};
}

AttentionVars bind(ad::Graph& graph, AttentionParams& params) {
  return {bind(graph, params.query), bind(graph, params.key), bind(graph, params.value),
          graph.parameter(params.output), params.heads};
}

ad::Var multi_head_self_attention(ad::Var x, const AttentionVars& params) {
  const std::size_t d = x.cols();
  const std::size_t heads = params.heads;
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention dim " + std::to_string(d) + " is not divisible by " +
                     std::to_string(heads) + " heads");
  }
  if (params.output.rows() != d) {
    throw ShapeError("attention weights are " + params.output.value().shape_string() +
                     " but tokens have width " + std::to_string(d));
  }
  const std::size_t head_dim = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ad::Var q = apply(params.query, x);
  ad::Var k = apply(params.key, x);
  ad::Var v = apply(params.value, x);

  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    ad::Var qh = heads == 1 ? q : ad::slice_cols(q, h * head_dim, head_dim);
    ad::Var kh = heads == 1 ? k : ad::slice_cols(k, h * head_dim, head_dim);
    ad::Var vh = heads == 1 ? v : ad::slice_cols(v, h * head_dim, head_dim);
    ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), scale);
    head_outputs.push_back(ad::matmul(ad::softmax_rows(scores), vh));
  }
  ad::Var mixed = heads == 1 ? head_outputs.front() : ad::concat_cols(head_outputs);
  return ad::add(x, ad::matmul(mixed, params.output));
}

}  // namespace protopop
