#pragma once

#include <cstdint>
#include <string>

#include "scopesim/env.hpp"
#include "scopesim/learn.hpp"
#include "scopesim/scenegen.hpp"
#include "scopesim/spta.hpp"

namespace scopesim {

/// Whole-pipeline configuration. One master seed fans out to per-stage
/// streams through Rng::derive(master_seed, tag[, index]), so any stage can
/// be re-run in isolation and reproduce its outputs.
///
/// The file format is line-oriented "key = value" with '#' comments; angles
/// cross this boundary in degrees and are radians everywhere inside. Unknown
/// keys are rejected, and save/load round-trips losslessly.
struct RunConfig {
  std::uint64_t master_seed = 1;
  SceneSpec scene;
  DemoSpec demo;
  PreprocessParams pre;
  AugmentationParams spta;
  EnvConfig env;
  TrainConfig train;
  int demos_per_train_scene = 1;
  int eval_episodes = 50;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_text(const RunConfig& config);
void save_config(const std::string& path, const RunConfig& config);

/// Applies one "key=value" override; throws on unknown keys or bad values.
void apply_config_override(RunConfig& config, const std::string& key,
                           const std::string& value);

}  // namespace scopesim
