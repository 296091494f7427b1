#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protopop/dataset.hpp"
#include "protopop/encoder.hpp"
#include "protopop/tensor.hpp"

namespace protopop {

struct SamplingPlan {
  std::size_t shots = 256;
  std::size_t temporal_bins = 8;
  // Max shots per user within one class; 0 means ceil(shots / 16).
  std::size_t user_cap = 0;

  std::size_t effective_user_cap() const;
  void validate() const;
};

// Outcome of diversity-aware shot selection for one class.
struct Selection {
  std::vector<std::string> ids;
  std::vector<std::size_t> bin_population;
  std::vector<std::size_t> bin_quota;
  // Shots per bin chosen while the user cap was enforced.
  std::vector<std::size_t> bin_selected_capped;
  // Shots taken from users already at the cap.
  std::size_t relaxed_picks = 0;

  bool cap_relaxed() const { return relaxed_picks > 0; }
};

// Three-stage selection over one class's posts:
//  1. equal-width temporal bins over the class timeline, quotas proportional
//     to bin population with largest-remainder rounding (ties: earlier bin);
//  2. round-robin over level-3 subtopics inside each bin;
//  3. at most user_cap shots per user, relaxed only when a bin quota would
//     otherwise be missed.
// Throws DataError for an empty class.
Selection stratified_select(std::span<const PostRecord* const> posts, const SamplingPlan& plan, std::uint64_t seed);

// Largest-remainder apportionment of `total` over `weights`.
std::vector<std::size_t> proportional_quotas(std::span<const std::size_t> weights, std::size_t total);

struct PrototypeSet {
  Tensor visual;   // K x d_enc
  Tensor textual;  // K x d_enc
  std::vector<Selection> selections;

  std::size_t classes() const { return visual.rows(); }
};

// Visual / textual prototypes are means of L2-normalized image / title-global embeddings over
// the selected shots of class i, drawn from `pool_ids`. Posts with an empty
// title contribute their all-tags embedding when the encoder provides one.
// Classes are processed in parallel with per-class seeds.
PrototypeSet build_prototypes(const Dataset& dataset, std::span<const std::string> pool_ids,
                              const EncoderProvider& encoder, const SamplingPlan& plan, std::uint64_t seed);

// visual.pemb (kind 0) and textual.pemb (kind 1) keyed by class name, plus
// provenance.json. Loading restores f32-rounded prototypes.
void save_prototypes(const std::filesystem::path& dir, const PrototypeSet& set, const ClassTable& classes);
PrototypeSet load_prototypes(const std::filesystem::path& dir, const ClassTable& classes);

}  // namespace protopop
