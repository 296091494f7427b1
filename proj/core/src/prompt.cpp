#include "protopop/prompt.hpp"

#include "protopop/error.hpp"

namespace protopop {

PromptBank PromptBank::init(std::size_t length, Tensor class_tokens, Rng& rng, double stddev) {
  if (length == 0) throw ConfigError("prompt length must be at least 1");
  const std::size_t d = class_tokens.cols();
  Tensor g(length, d), l(length, d);
  for (double& v : g.values()) v = rng.normal(0.0, stddev);
  for (double& v : l.values()) v = rng.normal(0.0, stddev);
  PromptBank bank;
  bank.global_context = Parameter("prompt.global_context", std::move(g));
  bank.local_context = Parameter("prompt.local_context", std::move(l));
  bank.class_tokens = std::move(class_tokens);
  return bank;
}

ClassEmbedVars class_embeddings(ad::Graph& graph, PromptBank& bank, const Tensor& composition) {
  if (bank.global_context.value.cols() != bank.token_dim() || bank.local_context.value.cols() != bank.token_dim()) {
    throw ShapeError("prompt context width does not match class token width");
  }
  if (composition.rows() != bank.token_dim()) {
    throw ShapeError("composition map expects token width " + std::to_string(composition.rows()) +
                     ", prompts have " + std::to_string(bank.token_dim()));
  }
  const double inv = 1.0 / static_cast<double>(bank.length() + 1);
  ad::Var tokens = graph.constant(bank.class_tokens);
  ad::Var map = graph.constant(composition);
  auto pooled = [&](Parameter& context) {
    ad::Var ctx = graph.parameter(context);
    ad::Var mean = ad::scale(ad::add_row(tokens, ad::col_sum(ctx)), inv);
    return ad::matmul(mean, map);
  };
  return {pooled(bank.global_context), pooled(bank.local_context)};
}

ad::Var global_score(ad::Var text, ad::Var global_embeds) { return ad::cosine_rows(text, global_embeds); }

ad::Var local_score(ad::Var tokens, ad::Var local_embeds, double temperature) {
  if (!(temperature > 0.0)) throw NumericError("local score temperature must be positive");
  ad::Var sims = ad::cosine_rows(local_embeds, tokens);  // K x l
  ad::Var weights = ad::softmax_rows(sims, temperature);
  return ad::transpose(ad::row_sum(ad::hadamard(weights, sims)));
}

PromptLosses prompt_losses(ad::Var global_scores, ad::Var local_scores, std::size_t label, double temperature) {
  if (!(temperature > 0.0)) throw NumericError("prompt loss temperature must be positive");
  return {ad::cross_entropy(ad::scale(global_scores, 1.0 / temperature), label),
          ad::cross_entropy(ad::scale(local_scores, 1.0 / temperature), label)};
}

std::vector<double> global_score(const Tensor& text, const Tensor& global_embeds) {
  ad::Graph g;
  auto out = global_score(g.constant(text), g.constant(global_embeds));
  return {out.value().values().begin(), out.value().values().end()};
}

std::vector<double> local_score(const Tensor& tokens, const Tensor& local_embeds, double temperature) {
  ad::Graph g;
  auto out = local_score(g.constant(tokens), g.constant(local_embeds), temperature);
  return {out.value().values().begin(), out.value().values().end()};
}

}  // namespace protopop
