// protopop command-line driver: one subcommand per pipeline stage.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "protopop/error.hpp"
#include "protopop/pipeline.hpp"

namespace pp = protopop::pipeline;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string source;
};

std::vector<double> parse_ratios(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0' || !(v > 0.0 && v <= 1.0)) {
      throw protopop::ConfigError("bad ratio '" + item + "' (expected values in (0, 1])");
    }
    out.push_back(v);
  }
  if (out.empty()) throw protopop::ConfigError("empty ratio list");
  return out;
}

protopop::RunConfig resolve(const CommonOptions& opts) {
  protopop::RunConfig config;
  if (!opts.config_path.empty()) config = protopop::RunConfig::load(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (!opts.source.empty()) config.train.source = protopop::parse_text_source(opts.source);
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Run config JSON");
  cmd->add_option("--seed", opts.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", opts.out, "Run directory")->capture_default_str();
  cmd->add_option("--source", opts.source, "Text source: title|alltags");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-aligned multimodal popularity prediction"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string ratio_list;
  std::string sweep_list;

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset and embeddings");
  auto* stats = app.add_subcommand("stats", "Dataset statistics and word-count histograms");
  auto* protos = app.add_subcommand("build-prototypes", "Build visual and textual class prototypes");
  auto* train = app.add_subcommand("train-align", "Train prompts and cross-modal fusion");
  auto* select = app.add_subcommand("select", "Loss-based sample selection and ratio sweep");
  auto* extract = app.add_subcommand("extract", "Extract regression features");
  auto* gbdt = app.add_subcommand("train-gbdt", "Fit both regressors and the fusion weight");
  auto* predict = app.add_subcommand("predict", "Predict validation popularity");
  auto* eval = app.add_subcommand("eval", "Overall and per-class SRC / MAE");
  auto* grid = app.add_subcommand("grid", "Feature-set x regressor x fusion results table");
  auto* run = app.add_subcommand("run", "gen-synth through eval");
  for (CLI::App* cmd : {gen, stats, protos, train, select, extract, gbdt, predict, eval, grid, run}) {
    add_common(cmd, opts);
  }
  select->add_option("--ratio", ratio_list, "Comma-separated keep ratios");
  select->add_option("--sweep", sweep_list, "Comma-separated keep ratios (alias of --ratio)");
  gbdt->add_option("--ratio", ratio_list, "Train on the lowest-loss fraction of rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const protopop::RunConfig config = resolve(opts);
    const std::filesystem::path out = opts.out;
    if (gen->parsed()) {
      pp::gen_synth(config, out);
    } else if (stats->parsed()) {
      const auto s = pp::stats(config, out);
      std::printf("posts %zu users %zu classes %zu\n", s.posts, s.users, s.class_counts.size());
    } else if (protos->parsed()) {
      pp::build_prototypes(config, out);
    } else if (train->parsed()) {
      const auto history = pp::train_align(config, out);
      for (std::size_t e = 0; e < history.epoch_means.size(); ++e) {
        std::printf("epoch %zu loss %.6f\n", e + 1, history.epoch_means[e]);
      }
    } else if (select->parsed()) {
      std::string list = !sweep_list.empty() ? sweep_list : ratio_list;
      std::vector<double> ratios = list.empty() ? std::vector<double>{config.train.selection_ratio} : parse_ratios(list);
      std::fputs(pp::select(config, out, ratios).to_table().c_str(), stdout);
    } else if (extract->parsed()) {
      pp::extract(config, out);
    } else if (gbdt->parsed()) {
      const std::vector<double> ratios = ratio_list.empty() ? std::vector<double>{1.0} : parse_ratios(ratio_list);
      if (ratios.size() != 1) throw protopop::ConfigError("train-gbdt takes a single --ratio");
      pp::train_gbdt(config, out, ratios.front());
    } else if (predict->parsed()) {
      pp::predict(config, out);
    } else if (eval->parsed()) {
      std::fputs(pp::eval(config, out).to_table().c_str(), stdout);
    } else if (grid->parsed()) {
      std::fputs(pp::grid_table(pp::grid(config, out)).c_str(), stdout);
    } else if (run->parsed()) {
      std::fputs(pp::run_all(config, out).to_table().c_str(), stdout);
    }
  } catch (const protopop::Error& e) {
    std::fprintf(stderr, "error kind=%s msg=%s\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error kind=internal msg=%s\n", e.what());
    return 2;
  }
  return 0;
}
