#include "scopesim/env.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace scopesim {

CameraIntrinsics intrinsics_for(const EnvConfig& config) {
  CameraIntrinsics intr;
  intr.width = config.obs_width;
  intr.height = config.obs_height;
  const double f = config.focal_at_width_160 * (config.obs_width / 160.0);
  intr.fx = f;
  intr.fy = f;
  intr.cx = config.obs_width / 2.0;
  intr.cy = config.obs_height / 2.0;
  return intr;
}

SceneEnvironment::SceneEnvironment(std::shared_ptr<const PointCloudScene> scene,
                                   WaypointTrajectory expert, Workspace workspace,
                                   EnvConfig config)
    : scene_(std::move(scene)), expert_(std::move(expert)),
      workspace_(workspace), config_(config), intrinsics_(intrinsics_for(config)) {
  if (!scene_ || scene_->size() == 0)
    throw std::invalid_argument("environment: empty scene");
  if (expert_.size() < 2)
    throw std::invalid_argument("environment: expert trajectory too short");
  if (config_.max_steps < 1 || config_.pos_threshold_mm <= 0 ||
      config_.rot_threshold_rad <= 0 || config_.pos_action_limit_mm <= 0 ||
      config_.rot_action_limit_rad <= 0)
    throw std::invalid_argument("environment: invalid config");
  state_.goal_pose = euler_to_pose(expert_.back());
}

RGBDImage SceneEnvironment::observe() const {
  RGBDImage obs = render(*scene_, state_.current_pose, intrinsics_, config_.splat_radius);
  if (!config_.observe_depth)
    std::fill(obs.depth.begin(), obs.depth.end(), 0.0f);
  return obs;
}

RGBDImage SceneEnvironment::reset(std::uint64_t seed) {
  Rng rng(seed);
  const EulerPose start = sample_start(workspace_, expert_.front(), rng);
  return reset_to(euler_to_pose(start));
}

RGBDImage SceneEnvironment::reset_to(const Pose& pose) {
  state_.current_pose = pose;
  state_.goal_pose = euler_to_pose(expert_.back());
  state_.step_count = 0;
  state_.done = false;
  state_.success = false;
  started_ = true;
  return observe();
}

StepResult SceneEnvironment::step(const std::array<double, 6>& normalized_action) {
  if (!started_) throw std::logic_error("step: reset was never called");
  if (state_.done) throw std::logic_error("step: episode already done");

  const Action physical =
      denormalize_action(normalized_action, config_.action_limits());
  state_.current_pose = compose(state_.current_pose, action_to_pose(physical));
  state_.step_count += 1;

  StepResult result;
  result.delta_p = norm(state_.current_pose.translation - state_.goal_pose.translation);
  result.delta_r =
      rotation_geodesic(state_.current_pose.rotation, state_.goal_pose.rotation);
  result.success = result.delta_p < config_.pos_threshold_mm &&
                   result.delta_r < config_.rot_threshold_rad;
  result.done = result.success || state_.step_count >= config_.max_steps;
  state_.success = result.success;
  state_.done = result.done;
  result.obs = observe();
  return result;
}

VectorEnv::VectorEnv(std::vector<SceneEnvironment> envs) : envs_(std::move(envs)) {
  if (envs_.empty()) throw std::invalid_argument("VectorEnv: no environments");
}

std::vector<RGBDImage> VectorEnv::reset_all(const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() != envs_.size())
    throw std::invalid_argument("reset_all: seed count mismatch");
  std::vector<RGBDImage> out(envs_.size());
  std::vector<std::string> errors(envs_.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(envs_.size()); ++i) {
    try {
      out[i] = envs_[i].reset(seeds[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("env " + std::to_string(i) + ": " + errors[i]);
  return out;
}

std::vector<StepResult> VectorEnv::step_all(
    const std::vector<std::array<double, 6>>& actions) {
  if (actions.size() != envs_.size())
    throw std::invalid_argument("step_all: action count mismatch");
  std::vector<StepResult> out(envs_.size());
  std::vector<std::string> errors(envs_.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(envs_.size()); ++i) {
    try {
      out[i] = envs_[i].step(actions[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("env " + std::to_string(i) + ": " + errors[i]);
  return out;
}

std::vector<RGBDImage> VectorEnv::reset_all_serial(
    const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() != envs_.size())
    throw std::invalid_argument("reset_all: seed count mismatch");
  std::vector<RGBDImage> out;
  out.reserve(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) out.push_back(envs_[i].reset(seeds[i]));
  return out;
}

std::vector<StepResult> VectorEnv::step_all_serial(
    const std::vector<std::array<double, 6>>& actions) {
  if (actions.size() != envs_.size())
    throw std::invalid_argument("step_all: action count mismatch");
  std::vector<StepResult> out;
  out.reserve(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) out.push_back(envs_[i].step(actions[i]));
  return out;
}

std::vector<ManifestEntry> Manifest::envs() const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.kind == ManifestEntry::Kind::Env) out.push_back(e);
  return out;
}

std::vector<ManifestEntry> Manifest::demos() const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.kind == ManifestEntry::Kind::Demo) out.push_back(e);
  return out;
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest: " + path);

  Manifest manifest;
  manifest.directory = std::filesystem::path(path).parent_path().string();

  std::string line;
  if (!std::getline(in, line) || line != "SCOPEMANIFEST 1")
    throw std::runtime_error(path + ": not a SCOPEMANIFEST 1 file");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    ManifestEntry entry;
    if (kind == "env")
      entry.kind = ManifestEntry::Kind::Env;
    else if (kind == "demo")
      entry.kind = ManifestEntry::Kind::Demo;
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": unknown entry kind '" + kind + "'");
    std::string token;
    while (ls >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected key=value, got '" + token + "'");
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "scene")
        entry.scene_path = value;
      else if (key == "trajectory")
        entry.trajectory_path = value;
      else
        entry.overrides.emplace_back(key, value);
    }
    if (entry.scene_path.empty() || entry.trajectory_path.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": entry needs scene= and trajectory=");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << "SCOPEMANIFEST 1\n";
  for (const auto& entry : entries) {
    out << (entry.kind == ManifestEntry::Kind::Env ? "env" : "demo");
    out << " scene=" << entry.scene_path << " trajectory=" << entry.trajectory_path;
    for (const auto& [key, value] : entry.overrides) out << " " << key << "=" << value;
    out << "\n";
  }
}

EnvConfig apply_overrides(const EnvConfig& base, const ManifestEntry& entry) {
  EnvConfig config = base;
  for (const auto& [key, value] : entry.overrides) {
    if (key == "pos_threshold_mm")
      config.pos_threshold_mm = std::stod(value);
    else if (key == "rot_threshold_deg")
      config.rot_threshold_rad = deg_to_rad(std::stod(value));
    else if (key == "max_steps")
      config.max_steps = std::stoi(value);
    else if (key == "observe_depth")
      config.observe_depth = value == "1" || value == "true";
    else if (key == "splat_radius")
      config.splat_radius = std::stoi(value);
    else
      throw std::runtime_error("unknown environment override: " + key);
  }
  return config;
}

WaypointTrajectory load_waypoints(const std::string& path, const PreprocessParams& pre) {
  const TrajectoryFile file = read_trajectory(path);
  if (file.header.count("d_fixed")) return as_waypoints(file);
  const int m = static_cast<int>(file.trajectory.points.size());
  int window = std::min(pre.smooth_window, m);
  if (window % 2 == 0) window -= 1;
  const RawTrajectory smoothed =
      window >= 3 ? smooth(file.trajectory, window) : file.trajectory;
  return resample_equal_distance(smoothed, pre.d_fixed_mm);
}

std::vector<SceneEnvironment> load_environments(const Manifest& manifest,
                                                const EnvConfig& base_config,
                                                const PreprocessParams& pre,
                                                const AugmentationParams& spta_params,
                                                std::uint64_t seed) {
  const std::filesystem::path dir(manifest.directory);
  std::map<std::string, std::shared_ptr<const PointCloudScene>> scene_cache;

  std::vector<SceneEnvironment> envs;
  std::size_t index = 0;
  for (const ManifestEntry& entry : manifest.envs()) {
    const std::string scene_path = (dir / entry.scene_path).string();
    auto it = scene_cache.find(scene_path);
    if (it == scene_cache.end()) {
      auto scene = std::make_shared<PointCloudScene>(load_scene(scene_path));
      it = scene_cache.emplace(scene_path, std::move(scene)).first;
    }
    WaypointTrajectory expert =
        load_waypoints((dir / entry.trajectory_path).string(), pre);
    Rng rng(Rng::derive(seed, "env-workspace", index));
    const Workspace ws = workspace_from_trajectory(expert, spta_params, rng);
    envs.emplace_back(it->second, std::move(expert), ws,
                      apply_overrides(base_config, entry));
    ++index;
  }
  return envs;
}

}  // namespace scopesim
