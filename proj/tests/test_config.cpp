#include <gtest/gtest.h>

#include "protopop/binary_io.hpp"
#include "protopop/config.hpp"
#include "protopop/error.hpp"
#include "support.hpp"

using namespace protopop;

TEST(RunConfig, DefaultsMatchDocumentedSettings) {
  const RunConfig c;
  EXPECT_EQ(c.synth.classes, 8u);
  EXPECT_EQ(c.synth.classes * c.synth.posts_per_class, 2000u);
  EXPECT_EQ(c.synth.dim, 32u);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.train.lr, 1e-4);
  EXPECT_EQ(c.train.selection_ratio, 0.77);
  EXPECT_EQ(c.train.fusion.dim, 64u);
  EXPECT_EQ(c.train.fusion.heads, 4u);
  EXPECT_EQ(c.oversample_threshold, 12.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.seed = 5;
  c.val_fraction = 0.25;
  c.synth.alpha = 0.6;
  c.train.epochs = 2;
  c.gbdt_b.max_depth = 3;
  c.sampling.shots = 64;
  c.data.manifest = "m.jsonl";
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.seed, 5u);
  EXPECT_EQ(back.gbdt_b.max_depth, 3u);
}

TEST(RunConfig, PartialDocumentKeepsDefaults) {
  const RunConfig c = RunConfig::from_json(R"({"seed": 3, "train": {"epochs": 1}})");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.train.epochs, 1u);
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.synth.dim, 32u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(RunConfig::from_json(R"({"sed": 3})"), ConfigError);
  EXPECT_THROW(RunConfig::from_json(R"({"train": {"epoch": 3}})"), ConfigError);
  EXPECT_THROW(RunConfig::from_json(R"({"seed": "zero"})"), ConfigError);
  EXPECT_THROW(RunConfig::from_json("{not json"), ConfigError);
  EXPECT_THROW(RunConfig::from_json(R"({"val_fraction": 1.5})"), ConfigError);
  EXPECT_THROW(RunConfig::from_json(R"({"train": {"selection_ratio": 0}})"), ConfigError);
}

TEST(RunConfig, MasterSeedFeedsEveryStage) {
  RunConfig a, b;
  b.seed = 1;
  EXPECT_EQ(a.synth_config().seed, 0u);
  EXPECT_EQ(b.synth_config().seed, 1u);
  EXPECT_NE(a.train_config().seed, b.train_config().seed);
  EXPECT_NE(a.gbdt_config_a().seed, a.gbdt_config_b().seed);
  EXPECT_NE(a.gbdt_config_a().seed, b.gbdt_config_a().seed);
  EXPECT_EQ(a.gbdt_config_a().tag, "A");
  EXPECT_EQ(a.gbdt_config_b().tag, "B");
}

TEST(RunConfig, LoadFromFile) {
  testutil::TempDir dir("config");
  write_file(dir.path() / "c.json", R"({"seed": 9})");
  EXPECT_EQ(RunConfig::load(dir.path() / "c.json").seed, 9u);
  EXPECT_THROW(RunConfig::load(dir.path() / "missing.json"), ConfigError);
}
