#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scopesim/learn.hpp"

namespace scopesim {

struct EpisodeRecord {
  int scene_index = 0;
  EulerPose start;
  std::vector<EulerPose> poses;                 // pose after each step
  std::vector<std::array<double, 6>> actions;   // normalized actions taken
  double final_delta_p = 0.0;                   // mm
  double final_delta_r = 0.0;                   // rad
  int steps = 0;
  bool success = false;
};

/// 100 * (successful episodes / episodes).
double success_rate(const std::vector<EpisodeRecord>& records);

/// Mean over successful episodes of |start - final| / steps (mm per step);
/// empty when no episode succeeded.
std::optional<double> action_efficiency(const std::vector<EpisodeRecord>& records);

// ---- controllers -----------------------------------------------------------

/// Action source under evaluation. Controllers are cloned per scene so
/// evaluation can run scenes in parallel.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::unique_ptr<Controller> clone() const = 0;
  virtual void begin_episode(int scene_index, int episode_index) = 0;
  virtual std::array<double, 6> act(const RGBDImage& obs) = 0;
};

/// Deterministic policy mean: a = tanh(mean(s)); no sampling.
class PolicyController : public Controller {
 public:
  PolicyController(const Network& policy, const Parameters& params,
                   float depth_scale_mm);
  std::unique_ptr<Controller> clone() const override;
  void begin_episode(int, int) override {}
  std::array<double, 6> act(const RGBDImage& obs) override;

 private:
  const Network* policy_;
  const Parameters* params_;
  float depth_scale_mm_;
};

/// Uniform random actions in [-1, 1]^6, deterministic per (seed, scene,
/// episode).
class RandomController : public Controller {
 public:
  explicit RandomController(std::uint64_t seed);
  std::unique_ptr<Controller> clone() const override;
  void begin_episode(int scene_index, int episode_index) override;
  std::array<double, 6> act(const RGBDImage& obs) override;

 private:
  std::uint64_t seed_;
  std::optional<Rng> rng_;
};

/// Replays a fixed normalized-action sequence per scene (zero action once
/// exhausted). Pairs with start_at_expert evaluation for the oracle row.
class ReplayController : public Controller {
 public:
  explicit ReplayController(std::vector<std::vector<std::array<double, 6>>> per_scene);
  std::unique_ptr<Controller> clone() const override;
  void begin_episode(int scene_index, int episode_index) override;
  std::array<double, 6> act(const RGBDImage& obs) override;

 private:
  std::vector<std::vector<std::array<double, 6>>> per_scene_;
  int scene_ = 0;
  std::size_t cursor_ = 0;
};

// ---- evaluation --------------------------------------------------------------

struct SceneReport {
  std::string scene_id;
  int episodes = 0;
  double sr = 0.0;          // percent
  double steps_mean = 0.0;
  double steps_std = 0.0;
  std::optional<double> a_eff;
};

struct EvaluationReport {
  std::string policy_id;
  std::uint64_t seed = 0;
  std::vector<SceneReport> scenes;
  // aggregate mean +/- std across scenes
  double sr_mean = 0.0, sr_std = 0.0;
  double steps_mean = 0.0, steps_std = 0.0;
  std::optional<double> a_eff_mean;
  double a_eff_std = 0.0;
  std::vector<EpisodeRecord> records;
};

struct EvalOptions {
  int episodes_per_scene = 50;
  std::uint64_t seed = 1;
  bool start_at_expert = false;
  std::string policy_id;
};

/// Runs episodes_per_scene episodes per environment (scenes in parallel,
/// deterministic per seed) and aggregates per-scene and across-scene stats.
EvaluationReport evaluate_policy(const Controller& controller,
                                 std::vector<SceneEnvironment>& envs,
                                 const EvalOptions& options);

void write_report(const std::string& path, const EvaluationReport& report);
void write_report_tsv(const std::string& path, const EvaluationReport& report);

// ---- feature export -----------------------------------------------------------

/// Last-hidden-layer activations, one row per observation row.
Tensor export_features(const Network& policy, const Parameters& params,
                       const Tensor& observations);
void write_features_tsv(const std::string& path, const Tensor& features);

/// FNV-1a over the raw parameter bytes; evaluation must not change it.
std::uint64_t parameter_checksum(const Parameters& params);

// ---- ablation ----------------------------------------------------------------

struct AblationConfig {
  Manifest train_manifest;
  Manifest test_manifest;
  EnvConfig env_config;
  PreprocessParams pre;
  AugmentationParams spta;
  TrainConfig train;
  std::vector<int> rates{0, 8, 32};  // SPTA rates; the last is the base cell
  int episodes_per_scene = 50;
  std::uint64_t seed = 1;
};

struct AblationRow {
  std::string name;
  double sr = 0.0;
  double steps = 0.0;
  std::optional<double> a_eff;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::pair<int, double>> rate_curve;  // (rate, SR)
};

/// Trains one policy per cell (SPTA rates, prior on/off, depth on/off) with
/// shared seeds and evaluates each on the test manifest.
AblationResult run_ablation(const AblationConfig& config, std::ostream* progress);

void write_ablation_table(const std::string& path, const AblationResult& result);
void write_rate_curve(const std::string& path, const AblationResult& result);

}  // namespace scopesim
