#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "protopop/config.hpp"
#include "protopop/dataset.hpp"
#include "protopop/encoder.hpp"
#include "protopop/gbdt.hpp"
#include "protopop/metrics.hpp"
#include "protopop/trainer.hpp"

// Pipeline stages behind the CLI. Each stage reads its inputs from a run
// directory, writes its outputs under a stage subdirectory, and echoes the
// run config there as config.json.
namespace protopop::pipeline {

namespace fs = std::filesystem;

struct RunData {
  Dataset dataset;
  std::shared_ptr<const TableEncoder> encoder;
  Split split;
};

fs::path manifest_path(const RunConfig& config, const fs::path& run_dir);
fs::path embeddings_dir(const RunConfig& config, const fs::path& run_dir);
RunData load_run_data(const RunConfig& config, const fs::path& run_dir);

void gen_synth(const RunConfig& config, const fs::path& run_dir);

struct DatasetStats {
  std::size_t posts = 0;
  std::size_t users = 0;
  std::vector<std::size_t> class_counts;
  std::vector<std::size_t> title_token_hist;  // index = token count
  std::vector<std::size_t> tag_hist;
  double popularity_mean = 0.0;
  double popularity_std = 0.0;
};
DatasetStats compute_stats(const Dataset& dataset);
DatasetStats stats(const RunConfig& config, const fs::path& run_dir);

void build_prototypes(const RunConfig& config, const fs::path& run_dir);
TrainHistory train_align(const RunConfig& config, const fs::path& run_dir);
void extract(const RunConfig& config, const fs::path& run_dir);

// Feature column groups: "stat", "user", "frozen" (image and text
// embeddings) and "aligned" (everything the alignment model computes).
FeatureLayout layout_from_columns(const std::vector<std::string>& columns);
std::vector<std::size_t> feature_columns(const FeatureLayout& layout, const std::vector<std::string>& groups);

struct RegressorRun {
  Forest forest_a;
  Forest forest_b;
  FusionWeights fusion;
  std::vector<double> val_a;
  std::vector<double> val_b;
  std::vector<double> val_fused;
};

// Fits both configs on the (oversampled) training rows and the fusion
// weight on validation.
RegressorRun fit_regressors(const RunConfig& config, const Dataset& dataset, const FeatureTable& train,
                            const FeatureTable& validation);

// Per-sample losses of the training split; writes select/losses.csv, one id
// list per ratio and, for every ratio, the validation metrics of regressors
// trained on the kept rows.
EvalReport select(const RunConfig& config, const fs::path& run_dir, const std::vector<double>& ratios);

// `ratio` < 1 trains on the lowest-loss rows listed by `select`.
void train_gbdt(const RunConfig& config, const fs::path& run_dir, double ratio = 1.0);
void predict(const RunConfig& config, const fs::path& run_dir);
EvalReport eval(const RunConfig& config, const fs::path& run_dir);

struct GridCell {
  std::optional<double> src;
  double mae = 0.0;
};

struct GridRow {
  std::string name;
  std::vector<std::string> groups;
  GridCell a, b, fused;
};

std::vector<GridRow> grid(const RunConfig& config, const fs::path& run_dir);
std::string grid_table(const std::vector<GridRow>& rows);

// gen-synth (when no manifest is configured) through eval.
EvalReport run_all(const RunConfig& config, const fs::path& run_dir);

}  // namespace protopop::pipeline
