#include "protopop/fusion.hpp"

#include <cmath>

#include "protopop/error.hpp"

namespace protopop {

FusionParams FusionParams::init(std::size_t encoder_dim, const FusionConfig& config, Rng& rng) {
  if (!(config.tau_visual > 0.0) || !(config.tau_textual > 0.0)) {
    throw ConfigError("fusion temperatures must be positive");
  }
  FusionParams p;
  p.image_proj = Affine::init("fusion.image_proj", encoder_dim, config.dim, rng);
  p.text_proj = Affine::init("fusion.text_proj", encoder_dim, config.dim, rng);
  p.attention = AttentionParams::init(config.dim, config.heads, rng);
  p.log_tau_visual = Parameter("fusion.log_tau_visual", Tensor(1, 1, std::log(config.tau_visual)));
  p.log_tau_textual = Parameter("fusion.log_tau_textual", Tensor(1, 1, std::log(config.tau_textual)));
  p.log_tau_visual.requires_grad = config.learn_temperatures;
  p.log_tau_textual.requires_grad = config.learn_temperatures;
  return p;
}

std::vector<Parameter*> FusionParams::parameters() {
  std::vector<Parameter*> out = image_proj.parameters();
  for (Parameter* p : text_proj.parameters()) out.push_back(p);
  for (Parameter* p : attention.parameters()) out.push_back(p);
  out.push_back(&log_tau_visual);
  out.push_back(&log_tau_textual);
  return out;
}

FusionVars bind(ad::Graph& graph, FusionParams& params, const Tensor& visual, const Tensor& textual) {
  if (visual.rows() != textual.rows()) throw ShapeError("visual and textual prototypes differ in class count");
  if (visual.cols() != params.image_proj.in_dim() || textual.cols() != params.text_proj.in_dim()) {
    throw ShapeError("prototype width does not match projection input width");
  }
  FusionVars v;
  v.image_proj = bind(graph, params.image_proj);
  v.text_proj = bind(graph, params.text_proj);
  v.attention = bind(graph, params.attention);
  v.inv_tau_visual = ad::exp(ad::scale(graph.parameter(params.log_tau_visual), -1.0));
  v.inv_tau_textual = ad::exp(ad::scale(graph.parameter(params.log_tau_textual), -1.0));
  v.visual_protos = apply(v.image_proj, graph.constant(visual));
  v.textual_protos = apply(v.text_proj, graph.constant(textual));
  return v;
}

FusedVars fuse(ad::Var x, const FusionVars& vars) {
  if (x.rows() != 1) throw ShapeError("fuse expects a single 1 x d_enc sample, got " + x.value().shape_string());
  const std::size_t K = vars.visual_protos.rows();
  ad::Var sequence = ad::concat_rows({apply(vars.image_proj, x), vars.visual_protos, vars.textual_protos});
  ad::Var y = multi_head_self_attention(sequence, vars.attention);
  return {ad::slice_rows(y, 0, 1), ad::slice_rows(y, 1, K), ad::slice_rows(y, 1 + K, K)};
}

namespace {

ad::Var visual_logits(const FusedVars& f, const FusionVars& vars) {
  return ad::mul_scalar(ad::cosine_rows(f.sample, f.visual), vars.inv_tau_visual);
}

ad::Var textual_logits(const FusedVars& f, const FusionVars& vars) {
  return ad::mul_scalar(ad::cosine_rows(f.sample, f.textual), vars.inv_tau_textual);
}

}  // namespace

ModalityProbs modality_probs(const FusedVars& fused, const FusionVars& vars) {
  return {ad::softmax_rows(visual_logits(fused, vars)), ad::softmax_rows(textual_logits(fused, vars))};
}

ad::Var cross_loss(const FusedVars& fused, const FusionVars& vars, std::size_t label) {
  ad::Var avg = ad::scale(ad::add(visual_logits(fused, vars), textual_logits(fused, vars)), 0.5);
  return ad::cross_entropy(avg, label);
}

ad::Var combined_prediction(const ModalityProbs& probs) {
  return ad::scale(ad::add(probs.visual, probs.textual), 0.5);
}

}  // namespace protopop
