#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scopesim/rng.hpp"
#include "scopesim/trajectory.hpp"

namespace scopesim {

/// Cubic start-sampling region near the head of an expert trajectory, plus
/// per-angle half-widths for the orientation perturbation.
struct Workspace {
  Vec3 min_corner;
  Vec3 max_corner;
  std::array<double, 3> orientation_range{0.0, 0.0, 0.0};  // radians
};

struct AugmentationParams {
  int rate = 32;                 // augmented trajectories per expert trajectory
  double epsilon_min = 0.005;    // endpoint tolerance, dimensionless
  double epsilon_max = 0.05;
  double gamma_decay = 0.0;      // < 0; 0 selects the default -5/L
  double cube_margin_mm = 0.5;   // workspace inflation per face
  double k_fraction = 0.2;       // k drawn from {2, ..., ceil(k_fraction * n)}
  double orientation_range_rad = deg_to_rad(3.0);
  // Augmentations whose step actions exceed the physical range are resampled
  // up to this many times before the dataset build fails.
  int retry_budget = 20;
};

/// Decay bookkeeping for one augmentation, recorded in output file headers.
struct AugmentationInfo {
  std::size_t j_star = 0;
  double dist = 0.0;
  double epsilon = 0.0;
  double gamma = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
};

/// Axis-aligned box over the positions of waypoints 1..k (k uniform in
/// {2, ..., max(2, ceil(k_fraction*n))}), inflated by cube_margin on every
/// face, so sampled starts stay near the trajectory head.
Workspace workspace_from_trajectory(const WaypointTrajectory& w,
                                    const AugmentationParams& params, Rng& rng,
                                    int* k_out = nullptr);

/// Position uniform in the box; orientation is the expert start orientation
/// plus an independent uniform perturbation per angle.
EulerPose sample_start(const Workspace& ws, const EulerPose& expert_start, Rng& rng);

/// Index of the positionally closest waypoint (ties to the smallest index)
/// and its distance.
std::pair<std::size_t, double> closest_waypoint(const EulerPose& start,
                                                const WaypointTrajectory& w);

/// Exponential-decay augmentation of the reference segment W[j*..end]: the
/// per-channel offset Δe_j' = k1*exp(gamma*j') + k2 satisfies Δe_0 = e0 and
/// Δe_L = eps*e0, and each output waypoint is the reference waypoint plus
/// (1-eps)*Δe. A zero positional gap returns the segment unchanged.
WaypointTrajectory augment(const WaypointTrajectory& w, const EulerPose& start,
                           const AugmentationParams& params, Rng& rng,
                           AugmentationInfo* info = nullptr);

/// Closed-form decay coefficients for boundary conditions e(0) = e0 and
/// e(L) = eps*e0.
struct DecayCoefficients {
  double k1 = 0.0;
  double k2 = 0.0;
};
DecayCoefficients solve_decay(double e0, double epsilon, double gamma, std::size_t L);

struct AugmentedTrajectory {
  WaypointTrajectory trajectory;
  std::optional<AugmentationInfo> info;  // empty for the original
  std::size_t source_index = 0;
};

/// R augmentations per input (fresh workspace, start, and epsilon each) plus
/// the original: (rate+1) * |demos| trajectories, order-stable and
/// deterministic in the seed regardless of thread count. Samples producing
/// out-of-range step actions are redrawn within the retry budget.
std::vector<AugmentedTrajectory> augment_dataset(
    const std::vector<WaypointTrajectory>& demos, const AugmentationParams& params,
    std::uint64_t seed, const ActionLimits& limits = {});

}  // namespace scopesim
