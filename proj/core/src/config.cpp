#include "protopop/config.hpp"

#include <set>

#include "json.hpp"
#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/random.hpp"

namespace protopop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads optional keys from one JSON object and rejects anything it did not
// consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + where(key) + "' has the wrong type");
    }
  }

  const json* object(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + where(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json gbdt_json(const GbdtConfig& c) {
  ordered_json j;
  j["rounds"] = c.rounds;
  j["max_depth"] = c.max_depth;
  j["min_leaf"] = c.min_leaf;
  j["learning_rate"] = c.learning_rate;
  j["feature_subsample"] = c.feature_subsample;
  return j;
}

void read_gbdt(ObjectReader& parent, const std::string& key, GbdtConfig& c) {
  const json* j = parent.object(key);
  if (!j) return;
  ObjectReader r(*j, parent.where(key));
  r.get("rounds", c.rounds);
  r.get("max_depth", c.max_depth);
  r.get("min_leaf", c.min_leaf);
  r.get("learning_rate", c.learning_rate);
  r.get("feature_subsample", c.feature_subsample);
  r.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
  if (oversample_factor < 1) throw ConfigError("oversample_factor must be at least 1");
  synth_config().validate();
  sampling.validate();
  train_config().validate();
  gbdt_config_a().validate();
  gbdt_config_b().validate();
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig c = synth;
  c.seed = seed;
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c = train;
  c.seed = derive_seed(seed, 0x7A11);
  return c;
}

GbdtConfig RunConfig::gbdt_config_a() const {
  GbdtConfig c = gbdt_a;
  c.seed = derive_seed(seed, 0xA);
  c.tag = "A";
  return c;
}

GbdtConfig RunConfig::gbdt_config_b() const {
  GbdtConfig c = gbdt_b;
  c.seed = derive_seed(seed, 0xB);
  c.tag = "B";
  return c;
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["val_fraction"] = val_fraction;
  j["data"] = {{"manifest", data.manifest}, {"classes", data.classes}, {"embeddings", data.embeddings}};
  ordered_json s;
  s["classes"] = synth.classes;
  s["posts_per_class"] = synth.posts_per_class;
  s["dim"] = synth.dim;
  s["alpha"] = synth.alpha;
  s["alpha_spread"] = synth.alpha_spread;
  s["noise_tokens_frac"] = synth.noise_tokens_frac;
  s["empty_title_frac"] = synth.empty_title_frac;
  s["subtopics_per_class"] = synth.subtopics_per_class;
  s["posts_per_user"] = synth.posts_per_user;
  s["class_name_mix"] = synth.class_name_mix;
  s["user_effect_scale"] = synth.user_effect_scale;
  s["alignment_scale"] = synth.alignment_scale;
  s["tag_effect"] = synth.tag_effect;
  s["noise_scale"] = synth.noise_scale;
  s["tail_scale"] = synth.tail_scale;
  s["mislabeled_frac"] = synth.mislabeled_frac;
  j["synth"] = s;
  j["sampling"] = {{"shots", sampling.shots}, {"temporal_bins", sampling.temporal_bins}, {"user_cap", sampling.user_cap}};
  ordered_json t;
  t["lr"] = train.lr;
  t["weight_decay"] = train.weight_decay;
  t["epochs"] = train.epochs;
  t["batch_size"] = train.batch_size;
  t["selection_ratio"] = train.selection_ratio;
  t["prompt_length"] = train.prompt_length;
  t["prompt_init_std"] = train.prompt_init_std;
  t["tau_global"] = train.tau_global;
  t["tau_local"] = train.tau_local;
  t["fusion_dim"] = train.fusion.dim;
  t["heads"] = train.fusion.heads;
  t["tau_visual"] = train.fusion.tau_visual;
  t["tau_textual"] = train.fusion.tau_textual;
  t["learn_temperatures"] = train.fusion.learn_temperatures;
  t["source"] = to_string(train.source);
  j["train"] = t;
  j["gbdt_a"] = gbdt_json(gbdt_a);
  j["gbdt_b"] = gbdt_json(gbdt_b);
  j["oversample"] = {{"threshold", oversample_threshold}, {"factor", oversample_factor}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader root(j, "");
  root.get("seed", c.seed);
  root.get("val_fraction", c.val_fraction);
  if (const json* d = root.object("data")) {
    ObjectReader r(*d, "data");
    r.get("manifest", c.data.manifest);
    r.get("classes", c.data.classes);
    r.get("embeddings", c.data.embeddings);
    r.finish();
  }
  if (const json* s = root.object("synth")) {
    ObjectReader r(*s, "synth");
    r.get("classes", c.synth.classes);
    r.get("posts_per_class", c.synth.posts_per_class);
    r.get("dim", c.synth.dim);
    r.get("alpha", c.synth.alpha);
    r.get("alpha_spread", c.synth.alpha_spread);
    r.get("noise_tokens_frac", c.synth.noise_tokens_frac);
    r.get("empty_title_frac", c.synth.empty_title_frac);
    r.get("subtopics_per_class", c.synth.subtopics_per_class);
    r.get("posts_per_user", c.synth.posts_per_user);
    r.get("class_name_mix", c.synth.class_name_mix);
    r.get("user_effect_scale", c.synth.user_effect_scale);
    r.get("alignment_scale", c.synth.alignment_scale);
    r.get("tag_effect", c.synth.tag_effect);
    r.get("noise_scale", c.synth.noise_scale);
    r.get("tail_scale", c.synth.tail_scale);
    r.get("mislabeled_frac", c.synth.mislabeled_frac);
    r.finish();
  }
  if (const json* s = root.object("sampling")) {
    ObjectReader r(*s, "sampling");
    r.get("shots", c.sampling.shots);
    r.get("temporal_bins", c.sampling.temporal_bins);
    r.get("user_cap", c.sampling.user_cap);
    r.finish();
  }
  if (const json* t = root.object("train")) {
    ObjectReader r(*t, "train");
    r.get("lr", c.train.lr);
    r.get("weight_decay", c.train.weight_decay);
    r.get("epochs", c.train.epochs);
    r.get("batch_size", c.train.batch_size);
    r.get("selection_ratio", c.train.selection_ratio);
    r.get("prompt_length", c.train.prompt_length);
    r.get("prompt_init_std", c.train.prompt_init_std);
    r.get("tau_global", c.train.tau_global);
    r.get("tau_local", c.train.tau_local);
    r.get("fusion_dim", c.train.fusion.dim);
    r.get("heads", c.train.fusion.heads);
    r.get("tau_visual", c.train.fusion.tau_visual);
    r.get("tau_textual", c.train.fusion.tau_textual);
    r.get("learn_temperatures", c.train.fusion.learn_temperatures);
    std::string source = to_string(c.train.source);
    r.get("source", source);
    try {
      c.train.source = parse_text_source(source);
    } catch (const Error&) {
      throw ConfigError("config: 'train.source' must be title or alltags");
    }
    r.finish();
  }
  read_gbdt(root, "gbdt_a", c.gbdt_a);
  read_gbdt(root, "gbdt_b", c.gbdt_b);
  if (const json* o = root.object("oversample")) {
    ObjectReader r(*o, "oversample");
    r.get("threshold", c.oversample_threshold);
    r.get("factor", c.oversample_factor);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return from_json(read_file(path));
}

}  // namespace protopop
