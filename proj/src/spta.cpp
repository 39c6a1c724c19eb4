#include "scopesim/spta.hpp"

#include <cmath>
#include <stdexcept>

namespace scopesim {

namespace {

constexpr double kZeroDist = 1e-12;

bool actions_within_limits(const WaypointTrajectory& w, const ActionLimits& limits) {
  try {
    waypoint_actions(w, limits);
    return true;
  } catch (const ActionRangeError&) {
    return false;
  }
}

}  // namespace

Workspace workspace_from_trajectory(const WaypointTrajectory& w,
                                    const AugmentationParams& params, Rng& rng,
                                    int* k_out) {
  const std::size_t n = w.size();
  if (n < 2) throw std::invalid_argument("workspace: trajectory needs at least 2 waypoints");

  const std::size_t k_max =
      std::max<std::size_t>(2, static_cast<std::size_t>(
                                   std::ceil(params.k_fraction * static_cast<double>(n))));
  const std::size_t k =
      2 + static_cast<std::size_t>(rng.uniform_int(k_max - 1));  // uniform in {2..k_max}
  if (k_out) *k_out = static_cast<int>(k);

  Aabb box;
  box.min_corner = box.max_corner = w.waypoints[0].position();
  for (std::size_t j = 1; j < std::min(k, n); ++j) box.expand(w.waypoints[j].position());

  Workspace ws;
  const Vec3 margin{params.cube_margin_mm, params.cube_margin_mm, params.cube_margin_mm};
  ws.min_corner = box.min_corner - margin;
  ws.max_corner = box.max_corner + margin;
  ws.orientation_range = {params.orientation_range_rad, params.orientation_range_rad,
                          params.orientation_range_rad};
  return ws;
}

EulerPose sample_start(const Workspace& ws, const EulerPose& expert_start, Rng& rng) {
  EulerPose s = expert_start;
  s.x = rng.uniform(ws.min_corner.x, ws.max_corner.x);
  s.y = rng.uniform(ws.min_corner.y, ws.max_corner.y);
  s.z = rng.uniform(ws.min_corner.z, ws.max_corner.z);
  s.alpha += rng.uniform(-ws.orientation_range[0], ws.orientation_range[0]);
  s.beta += rng.uniform(-ws.orientation_range[1], ws.orientation_range[1]);
  s.gamma += rng.uniform(-ws.orientation_range[2], ws.orientation_range[2]);
  return s;
}

std::pair<std::size_t, double> closest_waypoint(const EulerPose& start,
                                                const WaypointTrajectory& w) {
  if (w.size() == 0) throw std::invalid_argument("closest_waypoint: empty trajectory");
  std::size_t best = 0;
  double best_dist = norm(start.position() - w.waypoints[0].position());
  for (std::size_t j = 1; j < w.size(); ++j) {
    const double d = norm(start.position() - w.waypoints[j].position());
    if (d < best_dist) {
      best = j;
      best_dist = d;
    }
  }
  return {best, best_dist};
}

DecayCoefficients solve_decay(double e0, double epsilon, double gamma, std::size_t L) {
  DecayCoefficients c;
  const double denom = 1.0 - std::exp(gamma * static_cast<double>(L));
  c.k1 = e0 * (1.0 - epsilon) / denom;
  c.k2 = e0 - c.k1;
  return c;
}

WaypointTrajectory augment(const WaypointTrajectory& w, const EulerPose& start,
                           const AugmentationParams& params, Rng& rng,
                           AugmentationInfo* info) {
  const auto [j_star, dist] = closest_waypoint(start, w);
  if (j_star + 1 >= w.size())
    throw std::invalid_argument("augment: closest waypoint is the endpoint");

  const std::size_t L = w.size() - 1 - j_star;
  const double epsilon = rng.uniform(params.epsilon_min, params.epsilon_max);
  const double gamma = params.gamma_decay < 0.0
                           ? params.gamma_decay
                           : -5.0 / static_cast<double>(L);

  WaypointTrajectory out;
  out.d_fixed = w.d_fixed;
  out.waypoints.assign(w.waypoints.begin() + static_cast<std::ptrdiff_t>(j_star),
                       w.waypoints.end());
  if (w.timestamps.size() == w.size())
    out.timestamps.assign(w.timestamps.begin() + static_cast<std::ptrdiff_t>(j_star),
                          w.timestamps.end());

  if (info) {
    info->j_star = j_star;
    info->dist = dist;
    info->epsilon = epsilon;
    info->gamma = gamma;
    info->seed = rng.seed();
  }
  if (dist < kZeroDist) return out;  // offset direction undefined; no-op

  // Per-channel initial gaps; for positions this realizes the offset along
  // the unit vector from W[j*] to the start.
  std::array<DecayCoefficients, 6> coeff{};
  for (int c = 0; c < 6; ++c) {
    const double e0 = start.channel(c) - w.waypoints[j_star].channel(c);
    coeff[c] = solve_decay(e0, epsilon, gamma, L);
  }

  for (std::size_t jp = 0; jp <= L; ++jp) {
    const double decay = std::exp(gamma * static_cast<double>(jp));
    for (int c = 0; c < 6; ++c) {
      const double delta = coeff[c].k1 * decay + coeff[c].k2;
      out.waypoints[jp].channel(c) += (1.0 - epsilon) * delta;
    }
  }
  return out;
}

std::vector<AugmentedTrajectory> augment_dataset(
    const std::vector<WaypointTrajectory>& demos, const AugmentationParams& params,
    std::uint64_t seed, const ActionLimits& limits) {
  if (params.rate < 1) throw std::invalid_argument("augment_dataset: rate must be >= 1");

  const std::size_t per_demo = static_cast<std::size_t>(params.rate) + 1;
  std::vector<AugmentedTrajectory> out(demos.size() * per_demo);
  const Rng base(seed);

  // One independent stream per (demo, variant) pair keeps the result
  // identical no matter how the loop is scheduled.
  std::vector<int> failures(demos.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t flat = 0;
       flat < static_cast<std::ptrdiff_t>(demos.size() * per_demo); ++flat) {
    const std::size_t demo_idx = static_cast<std::size_t>(flat) / per_demo;
    const std::size_t variant = static_cast<std::size_t>(flat) % per_demo;
    AugmentedTrajectory& slot = out[static_cast<std::size_t>(flat)];
    slot.source_index = demo_idx;
    if (variant == 0) {
      slot.trajectory = demos[demo_idx];
      continue;
    }

    Rng rng = base.split(static_cast<std::uint64_t>(flat));
    bool ok = false;
    for (int attempt = 0; attempt <= params.retry_budget; ++attempt) {
      int k = 0;
      const Workspace ws = workspace_from_trajectory(demos[demo_idx], params, rng, &k);
      const EulerPose start = sample_start(ws, demos[demo_idx].front(), rng);
      AugmentationInfo info;
      WaypointTrajectory aug = augment(demos[demo_idx], start, params, rng, &info);
      info.k = k;
      if (!actions_within_limits(aug, limits)) continue;
      slot.trajectory = std::move(aug);
      slot.info = info;
      ok = true;
      break;
    }
    if (!ok) {
#pragma omp atomic write
      failures[demo_idx] = 1;
    }
  }

  for (std::size_t i = 0; i < failures.size(); ++i)
    if (failures[i])
      throw std::runtime_error(
          "augment_dataset: retry budget exhausted for demonstration " +
          std::to_string(i));
  return out;
}

}  // namespace scopesim
