#pragma once

#include <cstddef>
#include <vector>

#include "protopop/attention.hpp"
#include "protopop/autodiff.hpp"
#include "protopop/random.hpp"

namespace protopop {

struct FusionConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  double tau_visual = 0.07;
  double tau_textual = 0.07;
  // Learn log-temperatures instead of keeping them fixed.
  bool learn_temperatures = false;
};

struct FusionParams {
  Affine image_proj;  // d_enc -> d, applied to the sample and visual prototypes
  Affine text_proj;   // d_enc -> d, applied to textual prototypes
  AttentionParams attention;
  Parameter log_tau_visual;   // 1 x 1
  Parameter log_tau_textual;  // 1 x 1

  static FusionParams init(std::size_t encoder_dim, const FusionConfig& config, Rng& rng);
  std::vector<Parameter*> parameters();
  bool learn_temperatures() const { return log_tau_visual.requires_grad; }
};

// Parameters bound into one graph. The projected prototypes are sample
// independent, so they are computed once per graph and shared.
struct FusionVars {
  AffineVars image_proj;
  AffineVars text_proj;
  AttentionVars attention;
  ad::Var inv_tau_visual;   // 1 x 1, 1 / tau_v
  ad::Var inv_tau_textual;  // 1 x 1, 1 / tau_t
  ad::Var visual_protos;    // K x d, image-projected
  ad::Var textual_protos;   // K x d, text-projected
};

FusionVars bind(ad::Graph& graph, FusionParams& params, const Tensor& visual, const Tensor& textual);

struct FusedVars {
  ad::Var sample;   // 1 x d
  ad::Var visual;   // K x d
  ad::Var textual;  // K x d
};

// Self-attention over [sample; visual prototypes; textual prototypes] after
// projection (length 1 + 2K), sliced back
// into the sample row and the two prototype blocks. x is 1 x d_enc.
FusedVars fuse(ad::Var x, const FusionVars& vars);

struct ModalityProbs {
  ad::Var visual;   // 1 x K, softmax over cosine to each fused visual prototype
  ad::Var textual;  // 1 x K, same against the fused textual prototypes
};

ModalityProbs modality_probs(const FusedVars& fused, const FusionVars& vars);

// Cross-entropy of the average of the two modality logit rows.
ad::Var cross_loss(const FusedVars& fused, const FusionVars& vars, std::size_t label);

// Mean of the visual and textual probability rows.
ad::Var combined_prediction(const ModalityProbs& probs);

}  // namespace protopop
