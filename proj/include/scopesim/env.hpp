#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "scopesim/renderer.hpp"
#include "scopesim/spta.hpp"
#include "scopesim/trajectory.hpp"

namespace scopesim {

struct EnvConfig {
  double pos_threshold_mm = 2.0;
  double rot_threshold_rad = deg_to_rad(5.0);
  int max_steps = 16;
  double pos_action_limit_mm = 1.5;
  double rot_action_limit_rad = deg_to_rad(3.0);
  bool observe_depth = true;
  int obs_width = 80;
  int obs_height = 64;
  int splat_radius = 1;
  double focal_at_width_160 = 175.0;

  ActionLimits action_limits() const {
    return ActionLimits{pos_action_limit_mm, rot_action_limit_rad};
  }
};

/// Pinhole intrinsics scaled from the 160-wide reference focal length, with a
/// centered principal point.
CameraIntrinsics intrinsics_for(const EnvConfig& config);

struct EpisodeState {
  Pose current_pose;
  Pose goal_pose;  // hidden from observations; used for termination only
  int step_count = 0;
  bool done = false;
  bool success = false;
};

struct StepResult {
  RGBDImage obs;
  bool done = false;
  bool success = false;
  double delta_p = 0.0;  // mm
  double delta_r = 0.0;  // rad
};

/// Episodic laparoscope-control environment over one rendered scene. The
/// goal is the expert trajectory endpoint; an episode succeeds when both the
/// position and orientation deviations drop below the thresholds. Not safe
/// for concurrent stepping; use VectorEnv for parallel rollout collection.
class SceneEnvironment {
 public:
  SceneEnvironment(std::shared_ptr<const PointCloudScene> scene,
                   WaypointTrajectory expert, Workspace workspace, EnvConfig config);

  /// Sample a start pose in the workspace (deterministic per seed) and return
  /// the first observation.
  RGBDImage reset(std::uint64_t seed);

  /// Start an episode from an explicit pose (expert replay, previews).
  RGBDImage reset_to(const Pose& pose);

  /// Apply a normalized action in [-1,1]^6 (clamped). Throws if the episode
  /// is already done or reset was never called.
  StepResult step(const std::array<double, 6>& normalized_action);

  RGBDImage observe() const;

  const EpisodeState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  const WaypointTrajectory& expert() const { return expert_; }
  const Workspace& workspace() const { return workspace_; }
  const PointCloudScene& scene() const { return *scene_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }

 private:
  std::shared_ptr<const PointCloudScene> scene_;
  WaypointTrajectory expert_;
  Workspace workspace_;
  EnvConfig config_;
  CameraIntrinsics intrinsics_;
  EpisodeState state_;
  bool started_ = false;
};

/// Steps a set of independent scene environments, one logical worker per
/// environment; results are identical to stepping each environment alone.
class VectorEnv {
 public:
  explicit VectorEnv(std::vector<SceneEnvironment> envs);

  std::size_t size() const { return envs_.size(); }
  SceneEnvironment& env(std::size_t i) { return envs_[i]; }
  const SceneEnvironment& env(std::size_t i) const { return envs_[i]; }

  std::vector<RGBDImage> reset_all(const std::vector<std::uint64_t>& seeds);
  std::vector<StepResult> step_all(const std::vector<std::array<double, 6>>& actions);

  /// Sequential implementations kept as the oracle for the parallel paths.
  std::vector<RGBDImage> reset_all_serial(const std::vector<std::uint64_t>& seeds);
  std::vector<StepResult> step_all_serial(
      const std::vector<std::array<double, 6>>& actions);

 private:
  std::vector<SceneEnvironment> envs_;
};

/// Environment manifest: "SCOPEMANIFEST 1" followed by one entry per line,
///   env scene=<path> trajectory=<path> [<config-key>=<value> ...]
///   demo scene=<path> trajectory=<path>
/// Paths are relative to the manifest file.
struct ManifestEntry {
  enum class Kind { Env, Demo } kind = Kind::Env;
  std::string scene_path;
  std::string trajectory_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::string directory;

  std::vector<ManifestEntry> envs() const;
  std::vector<ManifestEntry> demos() const;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

/// Applies "key=value" overrides from a manifest entry onto a config copy.
EnvConfig apply_overrides(const EnvConfig& base, const ManifestEntry& entry);

struct PreprocessParams {
  int smooth_window = 7;
  double d_fixed_mm = 1.0;
};

/// Loads a trajectory file as waypoints, smoothing and resampling raw files
/// (those without a d_fixed header) with the given parameters.
WaypointTrajectory load_waypoints(const std::string& path, const PreprocessParams& pre);

/// Builds one environment per `env` manifest entry. Scenes are cached and
/// shared read-only; each environment derives its workspace from its expert
/// trajectory with a per-entry stream of `seed`.
std::vector<SceneEnvironment> load_environments(const Manifest& manifest,
                                                const EnvConfig& base_config,
                                                const PreprocessParams& pre,
                                                const AugmentationParams& spta_params,
                                                std::uint64_t seed);

}  // namespace scopesim
