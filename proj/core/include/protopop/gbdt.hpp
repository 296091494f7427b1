#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protopop/tensor.hpp"

namespace protopop {

struct GbdtConfig {
  std::size_t rounds = 300;
  std::size_t max_depth = 6;
  std::size_t min_leaf = 5;
  double learning_rate = 0.05;
  double feature_subsample = 0.8;  // fraction of columns drawn per tree
  std::uint64_t seed = 0;
  std::string tag = "A";

  void validate() const;
  static GbdtConfig config_a(std::uint64_t seed = 0);
  static GbdtConfig config_b(std::uint64_t seed = 0);
};

// Split when feature >= 0: rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // root first

  double predict(std::span<const double> row) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct Forest {
  std::size_t features = 0;
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::string tag;
  std::vector<Tree> trees;

  double predict_row(std::span<const double> row) const;
  // Throws ShapeError when the width differs from training.
  std::vector<double> predict(const Tensor& x) const;
  friend bool operator==(const Forest&, const Forest&) = default;
};

// Squared-loss boosting with exact greedy splits. When `mse_trace` is given it
// receives the training MSE before the first round and after every round.
Forest fit_gbdt(const Tensor& x, std::span<const double> y, const GbdtConfig& config,
                std::vector<double>* mse_trace = nullptr);

// Indices 0..n-1 followed by factor-1 extra copies of every index whose label
// exceeds `threshold`, in index order.
std::vector<std::size_t> oversample_tail(std::span<const double> labels, double threshold = 12.0,
                                         std::size_t factor = 2);

struct FusionWeights {
  double w = 0.5;  // weight of config A; B gets 1 - w
  double src = 0.0;
  double mae = 0.0;
};

// Grid search over w in {0, 0.05, ..., 1} maximizing SRC, then lower MAE,
// then smaller w.
FusionWeights fuse_predictions(std::span<const double> pred_a, std::span<const double> pred_b,
                               std::span<const double> labels);
std::vector<double> blend(double w, std::span<const double> pred_a, std::span<const double> pred_b);

std::string encode_forest(const Forest& forest);
Forest decode_forest(std::string_view bytes);
void save_forest(const std::filesystem::path& path, const Forest& forest);
Forest load_forest(const std::filesystem::path& path);

// "post_id,prediction" CSV with round-trip precision.
void write_predictions(const std::filesystem::path& path, std::span<const std::string> ids,
                       std::span<const double> values);
std::vector<std::pair<std::string, double>> read_predictions(const std::filesystem::path& path);

}  // namespace protopop
