#include <benchmark/benchmark.h>

#include "protopop/attention.hpp"
#include "protopop/gbdt.hpp"
#include "protopop/metrics.hpp"
#include "protopop/random.hpp"
#include "protopop/synthetic.hpp"
#include "protopop/trainer.hpp"

using namespace protopop;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const Tensor a = random_tensor(n, n, rng), b = random_tensor(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(17)->Arg(64)->Arg(128);

// Forward and backward through one attention block over a 1 + 2K sequence.
void BM_AttentionForwardBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  AttentionParams params = AttentionParams::init(64, 4, rng);
  const Tensor x = random_tensor(len, 64, rng);
  for (auto _ : state) {
    ad::Graph g;
    auto y = multi_head_self_attention(g.constant(x), bind(g, params));
    g.backward(ad::sum(y));
  }
  for (Parameter* p : params.parameters()) p->zero_grad();
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(17)->Arg(65);

void BM_FitGbdt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = random_tensor(n, 40, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) + 0.5 * x(i, 1) * x(i, 2) + 0.1 * rng.normal();
  GbdtConfig cfg = GbdtConfig::config_a();
  cfg.rounds = 20;
  for (auto _ : state) benchmark::DoNotOptimize(fit_gbdt(x, y, cfg));
}
BENCHMARK(BM_FitGbdt)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = rng.normal(), b[i] = static_cast<double>(rng.index(50));
  for (auto _ : state) benchmark::DoNotOptimize(spearman(a, b));
}
BENCHMARK(BM_Spearman)->Arg(400)->Arg(10000);

void BM_EvaluateSample(benchmark::State& state) {
  const SyntheticData s = generate_synthetic(SynthConfig{.posts_per_class = 10});
  const TableEncoder encoder(std::make_shared<const EmbeddingTable>(s.embeddings));
  const auto ids = s.dataset.ids();
  auto protos = std::make_shared<const PrototypeSet>(build_prototypes(s.dataset, ids, encoder, SamplingPlan{}, 0));
  const auto names = s.dataset.classes().names();
  const AlignmentModel model =
      AlignmentModel::init(encoder.class_token_embeddings(names), encoder.composition_map(), protos, TrainConfig{});
  const PostRecord& post = s.dataset.posts().front();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_sample(model, encoder, post));
}
BENCHMARK(BM_EvaluateSample);

}  // namespace
BENCHMARK_MAIN();
