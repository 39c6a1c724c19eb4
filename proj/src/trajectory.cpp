#include "scopesim/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scopesim {

namespace {

// Tolerance for the "farther than d_fixed" selection: keeps resampling
// idempotent on trajectories that are already equally spaced.
constexpr double kSelectTol = 1e-9;

double position_distance(const EulerPose& a, const EulerPose& b) {
  return norm(a.position() - b.position());
}

std::string format_pose_line(double t, const EulerPose& p) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                t, p.x, p.y, p.z, p.alpha, p.beta, p.gamma);
  return buf;
}

}  // namespace

RawTrajectory smooth(const RawTrajectory& raw, int window) {
  const int m = static_cast<int>(raw.points.size());
  if (m < 2) throw std::invalid_argument("smooth: trajectory needs at least 2 points");
  if (window % 2 == 0 || window < 3 || window > m)
    throw std::invalid_argument("smooth: window must be odd and within [3, size]");

  RawTrajectory out = raw;
  const int half = window / 2;
  for (int channel = 0; channel < 6; ++channel) {
    for (int i = 0; i < m; ++i) {
      const int h = std::min({half, i, m - 1 - i});
      // Degree-1 least squares evaluated at the window center; over a
      // symmetric window the slope term drops out and the fit reduces to the
      // window mean.
      double sum = 0.0;
      for (int k = -h; k <= h; ++k) sum += raw.points[i + k].channel(channel);
      out.points[i].channel(channel) = sum / (2 * h + 1);
    }
  }
  return out;
}

WaypointTrajectory resample_equal_distance(const RawTrajectory& t, double d_fixed) {
  const std::size_t m = t.points.size();
  if (m < 2) throw std::invalid_argument("resample: trajectory needs at least 2 points");
  if (d_fixed <= 0.0) throw std::invalid_argument("resample: d_fixed must be positive");

  double path_length = 0.0;
  for (std::size_t i = 1; i < m; ++i)
    path_length += position_distance(t.points[i], t.points[i - 1]);
  if (path_length < d_fixed)
    throw std::invalid_argument("resample: path shorter than d_fixed");

  const bool with_time = t.timestamps.size() == m;
  auto time_at = [&](std::size_t i) {
    return with_time ? t.timestamps[i] : static_cast<double>(i);
  };

  WaypointTrajectory out;
  out.d_fixed = d_fixed;
  out.waypoints.push_back(t.points.front());
  out.timestamps.push_back(time_at(0));

  EulerPose current = t.points.front();
  double current_time = time_at(0);
  std::size_t cursor = 1;  // input indices advance monotonically

  while (true) {
    // First input point (from the cursor on) farther than d_fixed away.
    std::size_t target = cursor;
    while (target < m &&
           position_distance(t.points[target], current) < d_fixed - kSelectTol)
      ++target;
    if (target >= m) break;

    const double gap = position_distance(t.points[target], current);
    const double step = d_fixed / gap;
    EulerPose next = current;
    for (int channel = 0; channel < 6; ++channel)
      next.channel(channel) =
          current.channel(channel) +
          step * (t.points[target].channel(channel) - current.channel(channel));
    const double next_time =
        current_time + step * (time_at(target) - current_time);

    out.waypoints.push_back(next);
    out.timestamps.push_back(next_time);
    current = next;
    current_time = next_time;
    cursor = target;
  }

  // Preserve the exact expert endpoint as the final waypoint.
  out.waypoints.push_back(t.points.back());
  out.timestamps.push_back(time_at(m - 1));
  return out;
}

std::vector<Action> waypoint_actions(const WaypointTrajectory& w,
                                     const ActionLimits& limits) {
  if (w.size() < 2)
    throw std::invalid_argument("waypoint_actions: need at least 2 waypoints");
  std::vector<Action> actions;
  actions.reserve(w.size() - 1);
  for (std::size_t j = 0; j + 1 < w.size(); ++j) {
    const Action a = relative_action(euler_to_pose(w.waypoints[j]),
                                     euler_to_pose(w.waypoints[j + 1]));
    for (int i = 0; i < 3; ++i)
      if (std::abs(a.channel(i)) > limits.pos_mm)
        throw ActionRangeError(j, "action position component out of range at waypoint " +
                                      std::to_string(j));
    for (int i = 3; i < 6; ++i)
      if (std::abs(a.channel(i)) > limits.rot_rad)
        throw ActionRangeError(j, "action rotation component out of range at waypoint " +
                                      std::to_string(j));
    actions.push_back(a);
  }
  return actions;
}

std::vector<DemonstrationTuple> extract_demonstrations(
    const WaypointTrajectory& w, const RenderFn& render_state,
    const ActionLimits& limits) {
  const std::vector<Action> actions = waypoint_actions(w, limits);

  std::vector<RGBDImage> states;
  states.reserve(w.size());
  for (const EulerPose& wp : w.waypoints) states.push_back(render_state(euler_to_pose(wp)));

  std::vector<DemonstrationTuple> tuples;
  tuples.reserve(actions.size());
  for (std::size_t j = 0; j < actions.size(); ++j)
    tuples.push_back(DemonstrationTuple{states[j], actions[j], states[j + 1]});
  return tuples;
}

void write_trajectory(const std::string& path, const RawTrajectory& t,
                      const std::map<std::string, std::string>& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
  for (const auto& [key, value] : header) out << "# " << key << " " << value << "\n";
  const bool with_time = t.timestamps.size() == t.points.size();
  for (std::size_t i = 0; i < t.points.size(); ++i)
    out << format_pose_line(with_time ? t.timestamps[i] : static_cast<double>(i),
                            t.points[i])
        << "\n";
}

void write_trajectory(const std::string& path, const WaypointTrajectory& w,
                      std::map<std::string, std::string> header) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", w.d_fixed);
  header["d_fixed"] = buf;
  RawTrajectory raw{w.waypoints, w.timestamps};
  write_trajectory(path, raw, header);
}

TrajectoryFile read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trajectory file: " + path);

  TrajectoryFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key, value;
      hs >> key;
      std::getline(hs, value);
      const auto start = value.find_first_not_of(' ');
      file.header[key] = start == std::string::npos ? "" : value.substr(start);
      continue;
    }
    std::istringstream ls(line);
    double t = 0.0;
    EulerPose p;
    if (!(ls >> t >> p.x >> p.y >> p.z >> p.alpha >> p.beta >> p.gamma))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed trajectory line");
    file.trajectory.points.push_back(p);
    file.trajectory.timestamps.push_back(t);
  }
  if (file.trajectory.points.size() < 2)
    throw std::runtime_error(path + ": trajectory needs at least 2 poses");
  return file;
}

WaypointTrajectory as_waypoints(const TrajectoryFile& file) {
  const auto it = file.header.find("d_fixed");
  if (it == file.header.end())
    throw std::runtime_error("trajectory file lacks d_fixed header");
  WaypointTrajectory w;
  w.waypoints = file.trajectory.points;
  w.timestamps = file.trajectory.timestamps;
  w.d_fixed = std::stod(it->second);
  return w;
}

}  // namespace scopesim
