#include <gtest/gtest.h>

#include "protopop/binary_io.hpp"
#include "protopop/dataset.hpp"
#include "protopop/embeddings.hpp"
#include "protopop/error.hpp"
#include "protopop/synthetic.hpp"
#include "support.hpp"

using namespace protopop;

TEST(Synthetic, DefaultSizes) {
  SyntheticData s = generate_synthetic(SynthConfig{});
  EXPECT_EQ(s.dataset.posts().size(), 2000u);
  EXPECT_EQ(s.dataset.classes().size(), 8u);
  EXPECT_EQ(s.embeddings.dim, 32u);
  EXPECT_EQ(s.embeddings.records.size(), 2000u);
  EXPECT_EQ(s.embeddings.class_tokens.size(), 8u);
}

TEST(Synthetic, AlphaOneGivesAnchorsExactly) {
  SynthConfig cfg;
  cfg.classes = 3;
  cfg.posts_per_class = 10;
  cfg.dim = 6;
  cfg.alpha = 1.0;
  cfg.mislabeled_frac = 0.0;
  SyntheticData s = generate_synthetic(cfg);
  for (const PostRecord& p : s.dataset.posts()) {
    const auto& img = s.embeddings.records.at(p.post_id).image;
    auto anchor = s.image_anchors.row(static_cast<std::size_t>(p.class_index));
    for (std::size_t k = 0; k < cfg.dim; ++k) {
      // Anchors are unit f32 vectors; renormalizing may move the last bit.
      EXPECT_NEAR(img[k], anchor[k], 1e-7);
    }
  }
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  testutil::TempDir a("synth_a"), b("synth_b");
  SynthConfig cfg;
  cfg.posts_per_class = 40;
  for (const auto* dir : {&a, &b}) {
    SyntheticData s = generate_synthetic(cfg);
    write_manifest(dir->path() / "m.jsonl", s.dataset);
    write_embeddings(dir->path() / "emb", s.embeddings);
  }
  for (const char* f : {"m.jsonl", "emb/image.pemb", "emb/text_global.pemb", "emb/text_tokens.pemb",
                        "emb/tags_tokens.pemb", "emb/class_tokens.pemb"}) {
    EXPECT_EQ(read_file(a.path() / f), read_file(b.path() / f)) << f;
  }
  cfg.seed = 1;
  EXPECT_NE(generate_synthetic(cfg).dataset.posts(), generate_synthetic(SynthConfig{.posts_per_class = 40}).dataset.posts());
}

TEST(Synthetic, NearestAnchorAccuracy) {
  SyntheticData s = generate_synthetic(SynthConfig{.mislabeled_frac = 0.0});
  std::size_t correct = 0;
  for (const PostRecord& p : s.dataset.posts()) {
    const auto& img = s.embeddings.records.at(p.post_id).image;
    std::size_t best = 0;
    double best_cos = -2;
    for (std::size_t k = 0; k < s.image_anchors.rows(); ++k) {
      const double c = cosine_similarity(img, s.image_anchors.row(k));
      if (c > best_cos) best_cos = c, best = k;
    }
    correct += best == static_cast<std::size_t>(p.class_index);
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(s.dataset.posts().size()), 0.9);
}

TEST(Synthetic, MislabeledPostsFollowAnotherAnchor) {
  SynthConfig cfg;
  cfg.alpha = 1.0;
  cfg.mislabeled_frac = 1.0;
  cfg.classes = 3;
  cfg.posts_per_class = 20;
  SyntheticData s = generate_synthetic(cfg);
  for (const PostRecord& p : s.dataset.posts()) {
    const auto& img = s.embeddings.records.at(p.post_id).image;
    EXPECT_LT(cosine_similarity(img, s.image_anchors.row(static_cast<std::size_t>(p.class_index))), 0.999);
  }
}

TEST(Synthetic, MislabeledFractionIsRoughlyHonored) {
  SyntheticData s = generate_synthetic(SynthConfig{.alpha = 1.0, .alpha_spread = 0.0, .mislabeled_frac = 0.15});
  std::size_t off = 0;
  for (const PostRecord& p : s.dataset.posts()) {
    const auto& img = s.embeddings.records.at(p.post_id).image;
    off += cosine_similarity(img, s.image_anchors.row(static_cast<std::size_t>(p.class_index))) < 0.999;
  }
  const double frac = static_cast<double>(off) / static_cast<double>(s.dataset.posts().size());
  EXPECT_NEAR(frac, 0.15, 0.03);
}

TEST(Synthetic, ValuesAreF32Representable) {
  SynthConfig cfg;
  cfg.posts_per_class = 5;
  SyntheticData s = generate_synthetic(cfg);
  EmbeddingTable copy = s.embeddings;
  quantize_to_f32(copy);
  EXPECT_EQ(copy, s.embeddings);
}

TEST(Synthetic, InvalidConfig) {
  EXPECT_THROW(generate_synthetic(SynthConfig{.classes = 1}), ConfigError);
  EXPECT_THROW(generate_synthetic(SynthConfig{.dim = 3}), ConfigError);
  SynthConfig bad;
  bad.alpha = 1.5;
  EXPECT_THROW(generate_synthetic(bad), ConfigError);
}
