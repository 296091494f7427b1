#include "protopop/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/optim.hpp"
#include "protopop/parallel.hpp"
#include "protopop/random.hpp"

namespace protopop {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(selection_ratio > 0.0 && selection_ratio <= 1.0)) throw ConfigError("selection_ratio must be in (0, 1]");
  if (prompt_length < 1) throw ConfigError("prompt_length must be at least 1");
  if (!(tau_global > 0.0) || !(tau_local > 0.0)) throw ConfigError("prompt temperatures must be positive");
  if (!(fusion.tau_visual > 0.0) || !(fusion.tau_textual > 0.0)) throw ConfigError("fusion temperatures must be positive");
  if (fusion.heads == 0 || fusion.dim % fusion.heads != 0) throw ConfigError("fusion dim must be divisible by heads");
}

std::string TrainConfig::to_json() const {
  ordered_json j;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["selection_ratio"] = selection_ratio;
  j["prompt_length"] = prompt_length;
  j["prompt_init_std"] = prompt_init_std;
  j["tau_global"] = tau_global;
  j["tau_local"] = tau_local;
  j["fusion_dim"] = fusion.dim;
  j["heads"] = fusion.heads;
  j["tau_visual"] = fusion.tau_visual;
  j["tau_textual"] = fusion.tau_textual;
  j["learn_temperatures"] = fusion.learn_temperatures;
  j["source"] = to_string(source);
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    json j = json::parse(text);
    c.lr = j.at("lr").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.selection_ratio = j.at("selection_ratio").get<double>();
    c.prompt_length = j.at("prompt_length").get<std::size_t>();
    c.prompt_init_std = j.at("prompt_init_std").get<double>();
    c.tau_global = j.at("tau_global").get<double>();
    c.tau_local = j.at("tau_local").get<double>();
    c.fusion.dim = j.at("fusion_dim").get<std::size_t>();
    c.fusion.heads = j.at("heads").get<std::size_t>();
    c.fusion.tau_visual = j.at("tau_visual").get<double>();
    c.fusion.tau_textual = j.at("tau_textual").get<double>();
    c.fusion.learn_temperatures = j.at("learn_temperatures").get<bool>();
    c.source = parse_text_source(j.at("source").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

AlignmentModel AlignmentModel::init(const Tensor& class_tokens, const Tensor& composition,
                                    std::shared_ptr<const PrototypeSet> prototypes, const TrainConfig& config) {
  config.validate();
  if (!prototypes) throw DataError("alignment model requires a prototype set");
  if (prototypes->classes() != class_tokens.rows()) {
    throw ShapeError("prototype set has " + std::to_string(prototypes->classes()) + " classes, class tokens have " +
                     std::to_string(class_tokens.rows()));
  }
  if (composition.rows() != class_tokens.cols()) {
    throw ShapeError("composition map rows must equal the class token width");
  }
  if (prototypes->visual.cols() != composition.cols()) {
    throw ShapeError("prototype width must equal the encoder dim");
  }
  Rng rng(derive_seed(config.seed, 0xA11C));
  AlignmentModel m;
  m.prompts = PromptBank::init(config.prompt_length, class_tokens, rng, config.prompt_init_std);
  m.fusion = FusionParams::init(composition.cols(), config.fusion, rng);
  m.composition = composition;
  m.prototypes = std::move(prototypes);
  m.config = config;
  return m;
}

std::vector<Parameter*> AlignmentModel::trainable() {
  std::vector<Parameter*> out = prompts.parameters();
  for (Parameter* p : fusion.parameters())
    if (p->requires_grad) out.push_back(p);
  return out;
}

namespace {

struct BoundModel {
  ClassEmbedVars embeds;
  FusionVars fusion;
};

BoundModel bind_model(ad::Graph& g, AlignmentModel& m) {
  return {class_embeddings(g, m.prompts, m.composition),
          bind(g, m.fusion, m.prototypes->visual, m.prototypes->textual)};
}

struct Forward {
  ad::Var global_sims;
  ad::Var local_sims;
  PromptLosses prompt_loss;
  ad::Var cross;
  FusedVars fused;
  ad::Var total;
};

std::size_t checked_label(const AlignmentModel& m, const PostRecord& post) {
  if (post.class_index < 0 || static_cast<std::size_t>(post.class_index) >= m.classes()) {
    throw DataError("post '" + post.post_id + "' has a class outside the model's " + std::to_string(m.classes()) +
                    " classes");
  }
  return static_cast<std::size_t>(post.class_index);
}

Forward forward(ad::Graph& g, const BoundModel& b, const AlignmentModel& m, const EncoderProvider& encoder,
                const PostRecord& post) {
  const std::size_t label = checked_label(m, post);
  const TextEncoding text = encoder.encode_text(post.post_id, m.config.source);
  Forward f;
  f.global_sims = global_score(g.constant(text.global), b.embeds.global);
  f.local_sims = local_score(g.constant(text.tokens), b.embeds.local, m.config.tau_local);
  f.prompt_loss = prompt_losses(f.global_sims, f.local_sims, label, m.config.tau_global);
  f.fused = fuse(g.constant(encoder.encode_image(post.post_id)), b.fusion);
  f.cross = cross_loss(f.fused, b.fusion, label);
  f.total = ad::add(ad::add(f.prompt_loss.global, f.prompt_loss.local), f.cross);
  return f;
}

std::vector<double> row_of(const ad::Var& v) { return {v.value().values().begin(), v.value().values().end()}; }

// Evaluates `fn(post_index, outputs)` for every id with one model copy and
// graph binding per chunk of posts.
template <typename Fn>
void evaluate_many(const AlignmentModel& model, const Dataset& dataset, std::span<const std::string> ids,
                   const EncoderProvider& encoder, Fn&& fn) {
  constexpr std::size_t kChunk = 32;
  const std::size_t chunks = (ids.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    AlignmentModel local = model;
    const std::size_t end = std::min(ids.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      ad::Graph g;
      BoundModel b = bind_model(g, local);
      fn(i, forward(g, b, local, encoder, dataset.get(ids[i])), b);
    }
  });
}

}  // namespace

TrainHistory train_alignment(AlignmentModel& model, const Dataset& dataset, std::span<const std::string> train_ids,
                             const EncoderProvider& encoder) {
  const TrainConfig& cfg = model.config;
  cfg.validate();
  if (train_ids.empty()) throw DataError("cannot train on an empty dataset");
  std::vector<std::string> order(train_ids.begin(), train_ids.end());
  std::sort(order.begin(), order.end());

  AdamW optimizer(model.trainable(), AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  optimizer.zero_grad();
  TrainHistory history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::string> perm = order;
    Rng rng(derive_seed(cfg.seed, 0xE0C0 + epoch));
    rng.shuffle(perm);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      // Per-sample graphs: gradients of the batch mean accumulate into the
      // parameters, identical to one graph over the whole batch.
      for (std::size_t i = start; i < end; ++i) {
        ad::Graph g;
        BoundModel b = bind_model(g, model);
        Forward f = forward(g, b, model, encoder, dataset.get(perm[i]));
        batch_loss += f.total.scalar();
        g.backward(ad::scale(f.total, inv));
      }
      optimizer.step();
      optimizer.zero_grad();
      batch_loss *= inv;
      history.batch_losses.push_back(batch_loss);
      epoch_total += batch_loss * static_cast<double>(end - start);
    }
    history.epoch_means.push_back(epoch_total / static_cast<double>(perm.size()));
  }
  return history;
}

SampleOutputs evaluate_sample(const AlignmentModel& model, const EncoderProvider& encoder, const PostRecord& post) {
  AlignmentModel local = model;
  ad::Graph g;
  BoundModel b = bind_model(g, local);
  Forward f = forward(g, b, local, encoder, post);
  ModalityProbs probs = modality_probs(f.fused, b.fusion);
  SampleOutputs out;
  out.loss_global = f.prompt_loss.global.scalar();
  out.loss_local = f.prompt_loss.local.scalar();
  out.loss_cross = f.cross.scalar();
  out.global_sims = row_of(f.global_sims);
  out.local_sims = row_of(f.local_sims);
  out.fused_sample = row_of(f.fused.sample);
  out.prob_visual = row_of(probs.visual);
  out.prob_textual = row_of(probs.textual);
  return out;
}

std::map<std::string, double> per_sample_losses(const AlignmentModel& model, const Dataset& dataset,
                                                std::span<const std::string> ids, const EncoderProvider& encoder) {
  std::vector<double> losses(ids.size());
  evaluate_many(model, dataset, ids, encoder,
                [&](std::size_t i, const Forward& f, const BoundModel&) { losses[i] = f.total.scalar(); });
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = losses[i];
  return out;
}

std::vector<std::string> select_samples(const std::map<std::string, double>& losses, double ratio) {
  if (losses.empty()) throw DataError("cannot select from an empty loss table");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("selection ratio must be in (0, 1]");
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(losses.size());
  for (const auto& [id, loss] : losses) ranked.push_back({loss, id});
  std::sort(ranked.begin(), ranked.end());
  // The epsilon keeps products like 0.29 * 100 from flooring to 28.
  auto keep = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ranked.size()) + 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, ranked.size());
  std::vector<std::string> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

FeatureTable extract_features(const AlignmentModel& model, const Dataset& dataset, std::span<const std::string> ids,
                              const EncoderProvider& encoder, const std::map<std::string, UserStats>& user_stats) {
  FeatureLayout layout{model.encoder_dim(), model.classes(), model.fusion_dim()};
  if (encoder.dim() != layout.encoder_dim) throw ShapeError("encoder dim does not match the model");
  FeatureTable table;
  table.ids.assign(ids.begin(), ids.end());
  table.columns = layout.column_names();
  table.values = Tensor(ids.size(), layout.width());
  for (const std::string& id : ids) {
    if (!user_stats.count(id)) throw DataError("missing user statistics for post_id '" + id + "'");
  }
  evaluate_many(model, dataset, ids, encoder, [&](std::size_t i, const Forward& f, const BoundModel& b) {
    const std::string& id = ids[i];
    ModalityProbs probs = modality_probs(f.fused, b.fusion);
    auto row = table.values.row(i);
    std::size_t c = 0;
    auto put = [&](std::span<const double> block) {
      for (double v : block) row[c++] = static_cast<double>(static_cast<float>(v));
    };
    put(encoder.encode_image(id).values());
    put(encoder.encode_text(id, model.config.source).global.values());
    put(f.global_sims.value().values());
    put(f.local_sims.value().values());
    put(f.fused.sample.value().values());
    put(probs.visual.value().values());
    put(probs.textual.value().values());
    put(user_stats.at(id));
  });
  return table;
}

namespace {

void put_tensors(BinaryWriter& w, const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.short_string(name);
    w.u32(static_cast<std::uint32_t>(t->rows()));
    w.u32(static_cast<std::uint32_t>(t->cols()));
    for (double v : t->values()) w.f64(v);
  }
}

std::map<std::string, Tensor> get_tensors(std::string_view payload, const std::string& section) {
  BinaryReader r(payload, "checkpoint section " + section);
  std::map<std::string, Tensor> out;
  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    std::string name = r.short_string();
    const std::size_t rows = r.u32();
    const std::size_t cols = r.u32();
    std::vector<double> values(rows * cols);
    for (double& v : values) v = r.f64();
    out.emplace(std::move(name), Tensor(rows, cols, std::move(values)));
  }
  return out;
}

Tensor take(std::map<std::string, Tensor>& tensors, const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
  return it->second;
}

constexpr std::uint16_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AlignmentModel& model) {
  AlignmentModel m = model;
  std::vector<std::pair<std::string, std::string>> sections;
  sections.push_back({"config", m.config.to_json()});
  {
    BinaryWriter w;
    put_tensors(w, {{m.prompts.global_context.name, &m.prompts.global_context.value},
                    {m.prompts.local_context.name, &m.prompts.local_context.value},
                    {"prompt.class_tokens", &m.prompts.class_tokens},
                    {"prompt.composition", &m.composition}});
    sections.push_back({"prompt_bank", w.take()});
  }
  {
    BinaryWriter w;
    std::vector<std::pair<std::string, const Tensor*>> list;
    for (Parameter* p : m.fusion.parameters()) list.push_back({p->name, &p->value});
    put_tensors(w, list);
    sections.push_back({"fusion", w.take()});
  }
  {
    BinaryWriter w;
    put_tensors(w, {{"visual", &m.prototypes->visual}, {"textual", &m.prototypes->textual}});
    sections.push_back({"prototypes", w.take()});
  }
  BinaryWriter out;
  out.bytes("PCKP");
  out.u16(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    out.short_string(name);
    out.long_string(payload);
  }
  write_file(path, out.buffer());
}

AlignmentModel load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  BinaryReader r(bytes, "checkpoint " + path.filename().string());
  if (r.remaining() < 4 || r.bytes(4) != "PCKP") throw FormatError("checkpoint: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: version mismatch " + std::to_string(version));
  std::map<std::string, std::string> sections;
  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    std::string name = r.short_string();
    sections[name] = r.long_string();
  }
  for (const char* required : {"config", "prompt_bank", "fusion", "prototypes"}) {
    if (!sections.count(required)) throw FormatError(std::string("checkpoint: missing section ") + required);
  }
  TrainConfig config = TrainConfig::from_json(sections["config"]);
  auto prompt = get_tensors(sections["prompt_bank"], "prompt_bank");
  auto protos = get_tensors(sections["prototypes"], "prototypes");
  auto set = std::make_shared<PrototypeSet>();
  set->visual = take(protos, "visual");
  set->textual = take(protos, "textual");
  AlignmentModel m = AlignmentModel::init(take(prompt, "prompt.class_tokens"), take(prompt, "prompt.composition"),
                                          std::move(set), config);
  m.prompts.global_context.value = take(prompt, m.prompts.global_context.name);
  m.prompts.local_context.value = take(prompt, m.prompts.local_context.name);
  auto fusion = get_tensors(sections["fusion"], "fusion");
  for (Parameter* p : m.fusion.parameters()) {
    Tensor t = take(fusion, p->name);
    if (!t.same_shape(p->value)) throw FormatError("checkpoint tensor '" + p->name + "' has the wrong shape");
    p->value = std::move(t);
  }
  if (m.prompts.global_context.value.rows() != config.prompt_length ||
      m.prompts.local_context.value.rows() != config.prompt_length) {
    throw FormatError("checkpoint prompt length disagrees with its config");
  }
  return m;
}

}  // namespace protopop
