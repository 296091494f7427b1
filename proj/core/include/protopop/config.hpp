#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "protopop/gbdt.hpp"
#include "protopop/prototypes.hpp"
#include "protopop/synthetic.hpp"
#include "protopop/trainer.hpp"

namespace protopop {

// Input locations. Empty paths resolve inside the run directory, where
// gen-synth writes its output.
struct DataPaths {
  std::string manifest;
  std::string classes;
  std::string embeddings;
};

// Everything a pipeline run needs. One master seed feeds every stage; the
// per-stage seed fields of the nested configs are overwritten from it.
struct RunConfig {
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  DataPaths data;
  SynthConfig synth;
  SamplingPlan sampling;
  TrainConfig train;
  GbdtConfig gbdt_a = GbdtConfig::config_a();
  GbdtConfig gbdt_b = GbdtConfig::config_b();
  double oversample_threshold = 12.0;
  std::size_t oversample_factor = 2;

  void validate() const;
  // Nested configs with seeds derived from the master seed.
  SynthConfig synth_config() const;
  TrainConfig train_config() const;
  GbdtConfig gbdt_config_a() const;
  GbdtConfig gbdt_config_b() const;

  std::string to_json() const;
  // Missing keys keep their defaults; unknown keys throw ConfigError.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace protopop
