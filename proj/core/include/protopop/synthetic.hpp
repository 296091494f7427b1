#pragma once

#include <cstddef>
#include <cstdint>

#include "protopop/dataset.hpp"
#include "protopop/embeddings.hpp"
#include "protopop/tensor.hpp"

namespace protopop {

// Desk-scale stand-in for a crawled dataset plus frozen encoders. Each class
// gets unit anchors in image and text space; samples mix their anchor with
// unit noise at weight `alpha`. Popularity combines a class offset, a user
// effect, an image-to-anchor alignment term, a tag-count term and skewed noise.
// A mislabeled fraction models off-topic posts filed under the wrong class.
struct SynthConfig {
  std::size_t classes = 8;
  std::size_t posts_per_class = 250;
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  double alpha = 0.7;
  // Per-post anchor weight is uniform in alpha +- alpha_spread * (1 - alpha).
  double alpha_spread = 1.0;
  double noise_tokens_frac = 0.3;
  double empty_title_frac = 0.05;
  std::size_t subtopics_per_class = 4;
  std::size_t posts_per_user = 8;   // average; activity is skewed
  double class_name_mix = 0.5;      // anchor weight in class-name token embeddings
  double user_effect_scale = 1.0;
  double alignment_scale = 5.0;
  double tag_effect = 0.1;
  double noise_scale = 0.8;
  double tail_scale = 0.6;
  // Posts whose content comes from another class's anchors and whose
  // popularity carries no signal beyond the class offset.
  double mislabeled_frac = 0.15;

  // Throws ConfigError when classes < 2, dim < 4 or a fraction is outside [0, 1].
  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  EmbeddingTable embeddings;
  Tensor image_anchors;  // K x dim, unit rows
  Tensor text_anchors;   // K x dim, unit rows
};

SyntheticData generate_synthetic(const SynthConfig& config);

}  // namespace protopop
