#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scopesim/geometry.hpp"
#include "scopesim/renderer.hpp"

namespace scopesim {

/// Recorded expert trajectory before preprocessing. Timestamps are optional;
/// when present they align 1:1 with points.
struct RawTrajectory {
  std::vector<EulerPose> points;
  std::vector<double> timestamps;
};

/// Equal-distance waypoint trajectory: consecutive positional separations are
/// d_fixed, except possibly the final appended expert endpoint.
struct WaypointTrajectory {
  std::vector<EulerPose> waypoints;
  double d_fixed = 1.0;
  std::vector<double> timestamps;

  std::size_t size() const { return waypoints.size(); }
  const EulerPose& front() const { return waypoints.front(); }
  const EulerPose& back() const { return waypoints.back(); }
};

struct DemonstrationTuple {
  RGBDImage state;
  Action action;
  RGBDImage next_state;
};

/// First-order Savitzky-Golay smoothing applied per channel. The window must
/// be odd and within [3, size]; at the boundaries the window shrinks
/// symmetrically instead of padding, so trajectory endpoints are preserved.
RawTrajectory smooth(const RawTrajectory& raw, int window);

/// Resample into waypoints separated by d_fixed along the positional path.
/// The walk repeatedly steps exactly d_fixed toward the first input point
/// farther than d_fixed from the previous waypoint; orientation channels are
/// interpolated at the same step parameter. The exact expert endpoint is
/// appended as the final waypoint.
WaypointTrajectory resample_equal_distance(const RawTrajectory& t, double d_fixed);

/// Thrown when a derived action exceeds the physical range; carries the
/// offending waypoint index (a sign that d_fixed is too large).
struct ActionRangeError : std::runtime_error {
  ActionRangeError(std::size_t index, const std::string& what)
      : std::runtime_error(what), waypoint_index(index) {}
  std::size_t waypoint_index;
};

using RenderFn = std::function<RGBDImage(const Pose&)>;

/// State-action-state tuples along the waypoint trajectory. States are
/// rendered by the supplied callback (one render per waypoint).
std::vector<DemonstrationTuple> extract_demonstrations(
    const WaypointTrajectory& w, const RenderFn& render_state,
    const ActionLimits& limits = {});

/// Relative actions between consecutive waypoints, range-checked against the
/// physical limits.
std::vector<Action> waypoint_actions(const WaypointTrajectory& w,
                                     const ActionLimits& limits = {});

/// Trajectory file: '#'-prefixed header lines of "key value" pairs, then one
/// line per pose with seven fields "t x y z alpha beta gamma"
/// (seconds, mm, radians).
struct TrajectoryFile {
  std::map<std::string, std::string> header;
  RawTrajectory trajectory;
};

void write_trajectory(const std::string& path, const RawTrajectory& t,
                      const std::map<std::string, std::string>& header);
void write_trajectory(const std::string& path, const WaypointTrajectory& w,
                      std::map<std::string, std::string> header);
TrajectoryFile read_trajectory(const std::string& path);

/// Interpret a trajectory file as waypoints; requires a d_fixed header entry.
WaypointTrajectory as_waypoints(const TrajectoryFile& file);

}  // namespace scopesim
