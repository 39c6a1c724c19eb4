#pragma once

#include <cstdint>
#include <vector>

#include "scopesim/pointcloud.hpp"
#include "scopesim/renderer.hpp"
#include "scopesim/rng.hpp"
#include "scopesim/trajectory.hpp"

namespace scopesim {

/// Procedural cavity scene parameters. The cavity is a concave dome facing
/// the world +Z axis with smooth radial deformation, organic color texture,
/// and a handful of high-contrast landmark blobs; landmark 0 is the bright
/// target the synthetic expert frames.
struct SceneSpec {
  std::size_t point_count = 100000;
  double cavity_radius_min_mm = 45.0;
  double cavity_radius_max_mm = 55.0;
  int landmark_count = 5;
  double texture_scale = 3.0;
};

struct GeneratedScene {
  PointCloudScene cloud;
  std::vector<Vec3> landmarks;  // landmark 0 is the target
  double base_radius_mm = 0.0;
};

/// Synthetic expert demonstration parameters.
struct DemoSpec {
  double path_length_min_mm = 8.0;
  double path_length_max_mm = 14.0;
  double goal_distance_mm = 25.0;     // camera-to-landmark distance at the goal
  double goal_distance_jitter_mm = 0.5;
  // The start view deliberately misses the landmark by this angle, so every
  // episode requires re-aiming and a random walk cannot stay inside the
  // orientation threshold by accident.
  double aim_error_min_rad = deg_to_rad(12.0);
  double aim_error_max_rad = deg_to_rad(16.0);
  // Cap on orientation change per millimeter of path, keeping resampled
  // per-step rotations inside the physical action range.
  double rot_per_mm_cap_rad = deg_to_rad(2.2);
  double start_rot_jitter_rad = deg_to_rad(2.0);
  double jitter_pos_sigma_mm = 0.15;
  double jitter_rot_sigma_rad = deg_to_rad(0.25);
  int sample_count = 64;
  double duration_s = 0.5;
  int retry_budget = 100;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

GeneratedScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Camera pose looking from `eye` at `target`; the camera +Y axis (image
/// down) is aligned against the fixed world up hint so roll is consistent
/// across scenes.
Pose look_at_pose(const Vec3& eye, const Vec3& target);

struct GeneratedDemo {
  RawTrajectory trajectory;
  Pose goal;
  Pose start;
};

/// Expert motion toward a view that frames the target landmark: minimum-jerk
/// position profile, linear angles, plus per-channel Gaussian jitter. Fails
/// (after retries) if no valid goal placement frames the landmark.
GeneratedDemo generate_demonstration(const GeneratedScene& scene, const DemoSpec& spec,
                                     const CameraIntrinsics& check_intrinsics,
                                     std::uint64_t seed);

}  // namespace scopesim
