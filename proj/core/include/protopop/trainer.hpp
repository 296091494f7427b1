#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "protopop/dataset.hpp"
#include "protopop/encoder.hpp"
#include "protopop/fusion.hpp"
#include "protopop/prompt.hpp"
#include "protopop/prototypes.hpp"
#include "protopop/user_stats.hpp"

namespace protopop {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::size_t epochs = 4;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  double selection_ratio = 0.77;
  std::size_t prompt_length = 8;
  double prompt_init_std = 0.02;
  double tau_global = 0.07;  // shared by both prompt losses
  double tau_local = 0.1;    // token-aggregation temperature
  FusionConfig fusion;
  TextSource source = TextSource::Title;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Prompt bank and fusion parameters over a frozen prototype set.
struct AlignmentModel {
  PromptBank prompts;
  FusionParams fusion;
  Tensor composition;  // token_dim x d_enc
  std::shared_ptr<const PrototypeSet> prototypes;
  TrainConfig config;

  static AlignmentModel init(const Tensor& class_tokens, const Tensor& composition,
                             std::shared_ptr<const PrototypeSet> prototypes, const TrainConfig& config);

  std::size_t classes() const { return prompts.classes(); }
  std::size_t encoder_dim() const { return composition.cols(); }
  std::size_t fusion_dim() const { return fusion.image_proj.out_dim(); }
  std::vector<Parameter*> trainable();
};

struct TrainHistory {
  std::vector<double> batch_losses;
  std::vector<double> epoch_means;
};

// Minibatch AdamW on L = L_G + L_O + L_c averaged over each batch. Epoch
// order is a seeded permutation of the sorted ids. Throws DataError when
// `train_ids` is empty.
TrainHistory train_alignment(AlignmentModel& model, const Dataset& dataset, std::span<const std::string> train_ids,
                             const EncoderProvider& encoder);

// Everything the model computes for one post.
struct SampleOutputs {
  double loss_global = 0;
  double loss_local = 0;
  double loss_cross = 0;
  double total() const { return loss_global + loss_local + loss_cross; }
  std::vector<double> global_sims;   // K
  std::vector<double> local_sims;    // K
  std::vector<double> fused_sample;  // fusion width
  std::vector<double> prob_visual;   // K
  std::vector<double> prob_textual;  // K
};

SampleOutputs evaluate_sample(const AlignmentModel& model, const EncoderProvider& encoder, const PostRecord& post);

// Pure evaluation of the total training loss per post; parallel over posts.
std::map<std::string, double> per_sample_losses(const AlignmentModel& model, const Dataset& dataset,
                                                std::span<const std::string> ids, const EncoderProvider& encoder);

// Keeps the floor(ratio * n) lowest-loss ids (at least one), ties broken by
// id. Returned sorted by id.
std::vector<std::string> select_samples(const std::map<std::string, double>& losses, double ratio);

// Column blocks of an extracted feature row.
struct FeatureLayout {
  std::size_t encoder_dim = 0;
  std::size_t classes = 0;
  std::size_t fusion_dim = 0;

  std::size_t width() const { return 2 * encoder_dim + 4 * classes + fusion_dim + kUserStatsWidth; }
  std::vector<std::string> column_names() const;
  // Offsets of each block in row order: image, text, global_sims,
  // local_sims, fused, prob_visual, prob_textual, user_stats.
  std::size_t offset_of(const std::string& block) const;
  std::size_t size_of(const std::string& block) const;
};

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Tensor values;  // ids.size() x columns.size(), f32-representable

  std::size_t width() const { return columns.size(); }
  std::size_t row_of(const std::string& id) const;
  // Sub-table with the given rows (by id) and columns (by index).
  FeatureTable subset(std::span<const std::string> row_ids, std::span<const std::size_t> column_indices) const;
  FeatureTable rows(std::span<const std::string> row_ids) const;

  // "PFEAT1 <rows> <cols>\n", a CSV line of column names, then f32 LE rows;
  // ids go to a sidecar file with one id per line.
  void write(const std::filesystem::path& path, const std::filesystem::path& ids_path) const;
  static FeatureTable read(const std::filesystem::path& path, const std::filesystem::path& ids_path);
};

// One row per id, in `ids` order, with blocks laid out as in FeatureLayout.
// Values are rounded to f32 so the table equals its file round trip.
FeatureTable extract_features(const AlignmentModel& model, const Dataset& dataset, std::span<const std::string> ids,
                              const EncoderProvider& encoder, const std::map<std::string, UserStats>& user_stats);

// Versioned binary checkpoint with named sections: config, prompt_bank,
// fusion, prototypes.
void save_checkpoint(const std::filesystem::path& path, const AlignmentModel& model);
AlignmentModel load_checkpoint(const std::filesystem::path& path);

}  // namespace protopop
