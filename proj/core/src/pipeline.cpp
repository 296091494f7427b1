#include "protopop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protopop/binary_io.hpp"
#include "protopop/error.hpp"
#include "protopop/prototypes.hpp"
#include "protopop/svg.hpp"
#include "protopop/synthetic.hpp"
#include "protopop/user_stats.hpp"

namespace protopop::pipeline {

using nlohmann::ordered_json;

namespace {

fs::path stage_dir(const RunConfig& config, const fs::path& run_dir, const std::string& name) {
  fs::path dir = run_dir / name;
  fs::create_directories(dir);
  write_file(dir / "config.json", config.to_json());
  return dir;
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) throw DataError("missing input " + path.string() + " (run " + producer + " first)");
}

std::string ratio_name(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", ratio);
  return buf;
}

std::vector<double> labels_of(const Dataset& dataset, std::span<const std::string> ids) {
  std::vector<double> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) out.push_back(dataset.get(id).popularity);
  return out;
}

std::shared_ptr<const PrototypeSet> load_prototype_set(const fs::path& run_dir, const Dataset& dataset) {
  require(run_dir / "prototypes" / "visual.pemb", "build-prototypes");
  return std::make_shared<const PrototypeSet>(load_prototypes(run_dir / "prototypes", dataset.classes()));
}

AlignmentModel load_model(const fs::path& run_dir) {
  const fs::path path = run_dir / "model" / "checkpoint.pckp";
  require(path, "train-align");
  return load_checkpoint(path);
}

FeatureTable load_features(const fs::path& run_dir, const std::string& split) {
  const fs::path path = run_dir / "features" / (split + ".pfeat");
  require(path, "extract");
  return FeatureTable::read(path, run_dir / "features" / (split + ".ids"));
}

std::map<std::string, double> read_losses(const fs::path& path) {
  require(path, "select");
  std::map<std::string, double> out;
  for (auto& [id, loss] : read_predictions(path)) out[id] = loss;
  return out;
}

ordered_json opt_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

fs::path manifest_path(const RunConfig& config, const fs::path& run_dir) {
  return config.data.manifest.empty() ? run_dir / "data" / "manifest.jsonl" : fs::path(config.data.manifest);
}

fs::path embeddings_dir(const RunConfig& config, const fs::path& run_dir) {
  return config.data.embeddings.empty() ? run_dir / "data" / "embeddings" : fs::path(config.data.embeddings);
}

RunData load_run_data(const RunConfig& config, const fs::path& run_dir) {
  const fs::path manifest = manifest_path(config, run_dir);
  require(manifest, "gen-synth");
  std::optional<fs::path> classes;
  if (!config.data.classes.empty()) classes = fs::path(config.data.classes);
  RunData data;
  data.dataset = load_manifest(manifest, classes);
  const fs::path emb = embeddings_dir(config, run_dir);
  require(emb / "image.pemb", "gen-synth");
  data.encoder = std::make_shared<const TableEncoder>(TableEncoder::from_directory(emb));
  data.split = make_split(data.dataset, config.val_fraction, derive_seed(config.seed, 0x5917));
  return data;
}

void gen_synth(const RunConfig& config, const fs::path& run_dir) {
  const SyntheticData synth = generate_synthetic(config.synth_config());
  const fs::path dir = stage_dir(config, run_dir, "data");
  write_manifest(dir / "manifest.jsonl", synth.dataset);
  synth.dataset.classes().write_json(dir / "classes.json");
  write_embeddings(dir / "embeddings", synth.embeddings);
}

DatasetStats compute_stats(const Dataset& dataset) {
  DatasetStats s;
  s.posts = dataset.posts().size();
  s.class_counts.assign(dataset.classes().size(), 0);
  std::set<std::string> users;
  double sum = 0, sum_sq = 0;
  for (const PostRecord& p : dataset.posts()) {
    users.insert(p.user_id);
    s.class_counts[static_cast<std::size_t>(p.class_index)]++;
    if (s.title_token_hist.size() <= p.title_tokens.size()) s.title_token_hist.resize(p.title_tokens.size() + 1);
    s.title_token_hist[p.title_tokens.size()]++;
    if (s.tag_hist.size() <= p.tag_tokens.size()) s.tag_hist.resize(p.tag_tokens.size() + 1);
    s.tag_hist[p.tag_tokens.size()]++;
    sum += p.popularity;
    sum_sq += p.popularity * p.popularity;
  }
  s.users = users.size();
  if (s.posts > 0) {
    const double n = static_cast<double>(s.posts);
    s.popularity_mean = sum / n;
    s.popularity_std = std::sqrt(std::max(0.0, sum_sq / n - s.popularity_mean * s.popularity_mean));
  }
  return s;
}

DatasetStats stats(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  const DatasetStats s = compute_stats(data.dataset);
  const fs::path dir = stage_dir(config, run_dir, "stats");
  ordered_json j;
  j["posts"] = s.posts;
  j["users"] = s.users;
  j["classes"] = ordered_json::object();
  const auto names = data.dataset.classes().names();
  for (std::size_t c = 0; c < names.size(); ++c) j["classes"][names[c]] = s.class_counts[c];
  j["title_token_hist"] = s.title_token_hist;
  j["tag_hist"] = s.tag_hist;
  j["popularity_mean"] = s.popularity_mean;
  j["popularity_std"] = s.popularity_std;
  write_file(dir / "stats.json", j.dump(2) + "\n");

  auto plot = [&](const std::vector<std::size_t>& hist, const std::string& title, const fs::path& path) {
    std::vector<std::string> labels;
    std::vector<double> counts;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      labels.push_back(std::to_string(i));
      counts.push_back(static_cast<double>(hist[i]));
    }
    write_file(path, svg_histogram(title, labels, counts));
  };
  plot(s.title_token_hist, "title word count", dir / "title_tokens.svg");
  plot(s.tag_hist, "tag count", dir / "tags.svg");
  return s;
}

void build_prototypes(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  const PrototypeSet set = protopop::build_prototypes(data.dataset, data.split.train, *data.encoder, config.sampling,
                                                      derive_seed(config.seed, 0x9207));
  const fs::path dir = stage_dir(config, run_dir, "prototypes");
  save_prototypes(dir, set, data.dataset.classes());
}

TrainHistory train_align(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  auto prototypes = load_prototype_set(run_dir, data.dataset);
  const auto names = data.dataset.classes().names();
  // Without class-name token embeddings the textual prototypes stand in.
  const Tensor class_tokens =
      data.encoder->has_class_tokens() ? data.encoder->class_token_embeddings(names) : prototypes->textual;
  AlignmentModel model =
      AlignmentModel::init(class_tokens, data.encoder->composition_map(), prototypes, config.train_config());
  const TrainHistory history = train_alignment(model, data.dataset, data.split.train, *data.encoder);
  const fs::path dir = stage_dir(config, run_dir, "model");
  save_checkpoint(dir / "checkpoint.pckp", model);
  ordered_json j;
  j["epoch_means"] = history.epoch_means;
  j["batch_losses"] = history.batch_losses;
  write_file(dir / "history.json", j.dump(2) + "\n");
  return history;
}

void extract(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  const AlignmentModel model = load_model(run_dir);
  const auto user_stats = compute_user_stats(data.dataset, data.split.train);
  const fs::path dir = stage_dir(config, run_dir, "features");
  for (const auto& [name, ids] : {std::pair{"train", &data.split.train}, std::pair{"val", &data.split.validation}}) {
    const FeatureTable table = extract_features(model, data.dataset, *ids, *data.encoder, user_stats);
    table.write(dir / (std::string(name) + ".pfeat"), dir / (std::string(name) + ".ids"));
  }
}

FeatureLayout layout_from_columns(const std::vector<std::string>& columns) {
  auto count = [&](const std::string& prefix) {
    return static_cast<std::size_t>(std::count_if(columns.begin(), columns.end(), [&](const std::string& c) {
      return c.rfind(prefix, 0) == 0;
    }));
  };
  FeatureLayout layout{count("image_"), count("global_sims_"), count("fused_")};
  if (layout.column_names() != columns) throw FormatError("feature columns do not follow the extracted layout");
  return layout;
}

std::vector<std::size_t> feature_columns(const FeatureLayout& layout, const std::vector<std::string>& groups) {
  std::vector<std::size_t> out;
  auto block = [&](const std::string& name) {
    const std::size_t off = layout.offset_of(name);
    for (std::size_t i = 0; i < layout.size_of(name); ++i) out.push_back(off + i);
  };
  const std::size_t stats = layout.offset_of("user_stats");
  for (const std::string& g : groups) {
    if (g == "stat") {
      for (std::size_t i = 3; i < kUserStatsWidth; ++i) out.push_back(stats + i);
    } else if (g == "user") {
      for (std::size_t i = 0; i < 3; ++i) out.push_back(stats + i);
    } else if (g == "frozen") {
      block("image");
      block("text");
    } else if (g == "aligned") {
      for (const char* name : {"global_sims", "local_sims", "fused", "prob_visual", "prob_textual"}) block(name);
    } else {
      throw ConfigError("unknown feature group '" + g + "'");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RegressorRun fit_regressors(const RunConfig& config, const Dataset& dataset, const FeatureTable& train,
                            const FeatureTable& validation) {
  const std::vector<double> train_labels = labels_of(dataset, train.ids);
  const auto rows = oversample_tail(train_labels, config.oversample_threshold, config.oversample_factor);
  Tensor x(rows.size(), train.width());
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(train.values.row(rows[r]).begin(), train.width(), x.row(r).begin());
    y[r] = train_labels[rows[r]];
  }
  RegressorRun run;
  run.forest_a = fit_gbdt(x, y, config.gbdt_config_a());
  run.forest_b = fit_gbdt(x, y, config.gbdt_config_b());
  run.val_a = run.forest_a.predict(validation.values);
  run.val_b = run.forest_b.predict(validation.values);
  run.fusion = fuse_predictions(run.val_a, run.val_b, labels_of(dataset, validation.ids));
  run.val_fused = blend(run.fusion.w, run.val_a, run.val_b);
  return run;
}

EvalReport select(const RunConfig& config, const fs::path& run_dir, const std::vector<double>& ratios) {
  if (ratios.empty()) throw ConfigError("select needs at least one ratio");
  const RunData data = load_run_data(config, run_dir);
  const AlignmentModel model = load_model(run_dir);
  const auto losses = per_sample_losses(model, data.dataset, data.split.train, *data.encoder);
  const FeatureTable train = load_features(run_dir, "train");
  const FeatureTable val = load_features(run_dir, "val");
  const fs::path dir = stage_dir(config, run_dir, "select");
  {
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& [id, loss] : losses) {
      ids.push_back(id);
      values.push_back(loss);
    }
    write_predictions(dir / "losses.csv", ids, values);
  }
  EvalReport report;
  report.count = val.ids.size();
  for (double ratio : ratios) {
    const auto kept = select_samples(losses, ratio);
    std::string listing;
    for (const std::string& id : kept) listing += id + "\n";
    write_file(dir / ("selected_" + ratio_name(ratio) + ".txt"), listing);
    const RegressorRun run = fit_regressors(config, data.dataset, train.rows(kept), val);
    const auto labels = labels_of(data.dataset, val.ids);
    report.sweep.push_back({ratio, kept.size(), try_spearman(run.val_fused, labels), mae(run.val_fused, labels)});
  }
  write_file(dir / "sweep.json", report.to_json());
  write_file(dir / "sweep.txt", report.to_table());
  return report;
}

void train_gbdt(const RunConfig& config, const fs::path& run_dir, double ratio) {
  const RunData data = load_run_data(config, run_dir);
  FeatureTable train = load_features(run_dir, "train");
  const FeatureTable val = load_features(run_dir, "val");
  if (ratio < 1.0) {
    train = train.rows(select_samples(read_losses(run_dir / "select" / "losses.csv"), ratio));
  } else if (ratio != 1.0) {
    throw ConfigError("ratio must be in (0, 1]");
  }
  const RegressorRun run = fit_regressors(config, data.dataset, train, val);
  const fs::path dir = stage_dir(config, run_dir, "gbdt");
  save_forest(dir / "forest_a.pfst", run.forest_a);
  save_forest(dir / "forest_b.pfst", run.forest_b);
  ordered_json j;
  j["w"] = run.fusion.w;
  j["val_src"] = run.fusion.src;
  j["val_mae"] = run.fusion.mae;
  j["ratio"] = ratio;
  j["train_rows"] = train.ids.size();
  write_file(dir / "fusion.json", j.dump(2) + "\n");
}

void predict(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  const FeatureTable val = load_features(run_dir, "val");
  require(run_dir / "gbdt" / "fusion.json", "train-gbdt");
  const Forest a = load_forest(run_dir / "gbdt" / "forest_a.pfst");
  const Forest b = load_forest(run_dir / "gbdt" / "forest_b.pfst");
  double w = 0.0;
  try {
    w = nlohmann::json::parse(read_file(run_dir / "gbdt" / "fusion.json")).at("w").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fusion.json: ") + e.what());
  }
  const auto pa = a.predict(val.values);
  const auto pb = b.predict(val.values);
  const auto fused = blend(w, pa, pb);
  const fs::path dir = stage_dir(config, run_dir, "predict");
  write_predictions(dir / "predictions.csv", val.ids, fused);
  write_predictions(dir / "predictions_a.csv", val.ids, pa);
  write_predictions(dir / "predictions_b.csv", val.ids, pb);
  write_file(dir / "scatter.svg", svg_scatter("predicted vs actual", labels_of(data.dataset, val.ids), fused));
}

EvalReport eval(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  const fs::path path = run_dir / "predict" / "predictions.csv";
  require(path, "predict");
  std::map<std::string, double> predictions;
  for (auto& [id, v] : read_predictions(path)) predictions[id] = v;
  const EvalReport report = per_class_report(data.dataset, predictions);
  const fs::path dir = stage_dir(config, run_dir, "eval");
  write_file(dir / "metrics.json", report.to_json());
  write_file(dir / "metrics.txt", report.to_table());
  return report;
}

std::vector<GridRow> grid(const RunConfig& config, const fs::path& run_dir) {
  const RunData data = load_run_data(config, run_dir);
  const FeatureTable train = load_features(run_dir, "train");
  const FeatureTable val = load_features(run_dir, "val");
  const FeatureLayout layout = layout_from_columns(train.columns);
  const auto labels = labels_of(data.dataset, val.ids);
  const std::vector<std::pair<std::string, std::vector<std::string>>> specs = {
      {"stat", {"stat"}},
      {"stat+user", {"stat", "user"}},
      {"stat+frozen", {"stat", "frozen"}},
      {"stat+aligned", {"stat", "frozen", "aligned"}},
      {"stat+user+frozen", {"stat", "user", "frozen"}},
      {"stat+user+aligned", {"stat", "user", "frozen", "aligned"}},
  };
  std::vector<GridRow> rows;
  for (const auto& [name, groups] : specs) {
    const auto cols = feature_columns(layout, groups);
    const RegressorRun run = fit_regressors(config, data.dataset, train.subset(train.ids, cols),
                                            val.subset(val.ids, cols));
    GridRow row{name, groups, {}, {}, {}};
    row.a = {try_spearman(run.val_a, labels), mae(run.val_a, labels)};
    row.b = {try_spearman(run.val_b, labels), mae(run.val_b, labels)};
    row.fused = {try_spearman(run.val_fused, labels), mae(run.val_fused, labels)};
    rows.push_back(std::move(row));
  }
  const fs::path dir = stage_dir(config, run_dir, "grid");
  ordered_json j = ordered_json::array();
  for (const GridRow& r : rows) {
    j.push_back({{"row", r.name},
                 {"groups", r.groups},
                 {"a", {{"src", opt_json(r.a.src)}, {"mae", r.a.mae}}},
                 {"b", {{"src", opt_json(r.b.src)}, {"mae", r.b.mae}}},
                 {"fusion", {{"src", opt_json(r.fused.src)}, {"mae", r.fused.mae}}}});
  }
  write_file(dir / "grid.json", j.dump(2) + "\n");
  write_file(dir / "grid.txt", grid_table(rows));
  return rows;
}

std::string grid_table(const std::vector<GridRow>& rows) {
  auto cell = [](const GridCell& c) {
    char buf[48];
    if (c.src) {
      std::snprintf(buf, sizeof buf, "%8.4f %8.4f", *c.src, c.mae);
    } else {
      std::snprintf(buf, sizeof buf, "%8s %8.4f", "n/a", c.mae);
    }
    return std::string(buf);
  };
  char line[200];
  std::snprintf(line, sizeof line, "%-20s %17s %17s %17s\n", "features", "A (src mae)", "B (src mae)",
                "fusion (src mae)");
  std::string out = line;
  for (const GridRow& r : rows) {
    std::snprintf(line, sizeof line, "%-20s %17s %17s %17s\n", r.name.c_str(), cell(r.a).c_str(), cell(r.b).c_str(),
                  cell(r.fused).c_str());
    out += line;
  }
  return out;
}

EvalReport run_all(const RunConfig& config, const fs::path& run_dir) {
  if (config.data.manifest.empty()) gen_synth(config, run_dir);
  build_prototypes(config, run_dir);
  train_align(config, run_dir);
  extract(config, run_dir);
  train_gbdt(config, run_dir);
  predict(config, run_dir);
  return eval(config, run_dir);
}

}  // namespace protopop::pipeline
