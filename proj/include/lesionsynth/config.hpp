#pragma once

#include <string>

#include "lesionsynth/classifier.hpp"
#include "lesionsynth/evalharness.hpp"
#include "lesionsynth/proggan.hpp"
#include "lesionsynth/trainer.hpp"

namespace lesionsynth::cli {

struct MapkitConfig {
  int slic_segments = 400;
  double slic_compactness = 10.0;
  int slic_iterations = 10;
  int width = 1024;   // letterbox target for map preparation
  int height = 512;
};

struct EvalConfig {
  eval::ExperimentConfig experiment;
};

// Top-level config document: one nested section per module, every
// design-decision default overridable, unknown keys rejected.
struct PipelineConfig {
  std::string dataset_root;   // falls back to $LESIONSYNTH_DATA
  std::string output_dir = "out";
  double test_ratio = 248.0 / 2594.0;
  uint64_t seed = 0;

  MapkitConfig mapkit;
  trainer::TrainingConfig trainer;
  proggan::PganConfig proggan;
  EvalConfig eval;

  void validate() const;
  // Canonical JSON (sorted keys, all fields explicit); its SHA-256 is
  // the fingerprint.
  std::string canonical() const;
  std::string fingerprint() const;
};

// Parses a JSON config file, applying defaults for absent keys. Unknown
// keys, type errors, and constraint violations raise ConfigError naming
// the full key path.
PipelineConfig parse_config(const std::string& path);
PipelineConfig parse_config_text(const std::string& text);

}  // namespace lesionsynth::cli
