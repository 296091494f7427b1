#pragma once

#include <cstddef>
#include <vector>

#include "protopop/autodiff.hpp"
#include "protopop/random.hpp"
#include "protopop/tensor.hpp"

namespace protopop {

// Learnable global and local prompt contexts shared by all classes, plus the
// frozen class-name token embeddings they are prepended to.
struct PromptBank {
  Parameter global_context;  // s x d_tok
  Parameter local_context;   // s x d_tok
  Tensor class_tokens;       // K x d_tok, frozen

  // Contexts drawn from N(0, stddev^2).
  static PromptBank init(std::size_t length, Tensor class_tokens, Rng& rng, double stddev = 0.02);

  std::size_t length() const { return global_context.value.rows(); }
  std::size_t token_dim() const { return class_tokens.cols(); }
  std::size_t classes() const { return class_tokens.rows(); }
  std::vector<Parameter*> parameters() { return {&global_context, &local_context}; }
};

struct ClassEmbedVars {
  ad::Var global;  // K x d_enc
  ad::Var local;   // K x d_enc
};

// Row i of each output is the mean of [context rows; class token i] mapped
// through the composition matrix.
ClassEmbedVars class_embeddings(ad::Graph& graph, PromptBank& bank, const Tensor& composition);

// Cosine of the 1 x d_enc text embedding with each global class embedding,
// result 1 x K.
ad::Var global_score(ad::Var text, ad::Var global_embeds);

// For each class, the token-to-class cosines averaged with softmax weights
// at `temperature`: small temperatures approach the max over tokens, large
// ones the mean. tokens is l x d_enc, result 1 x K.
ad::Var local_score(ad::Var tokens, ad::Var local_embeds, double temperature);

struct PromptLosses {
  ad::Var global;  // cross-entropy of the global scores over temperature
  ad::Var local;   // same for the local scores
};

PromptLosses prompt_losses(ad::Var global_scores, ad::Var local_scores, std::size_t label, double temperature);

// Value-level helpers for scoring outside a training graph.
std::vector<double> global_score(const Tensor& text, const Tensor& global_embeds);
std::vector<double> local_score(const Tensor& tokens, const Tensor& local_embeds, double temperature);

}  // namespace protopop
