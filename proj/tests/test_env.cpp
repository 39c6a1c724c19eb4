#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "scopesim/env.hpp"
#include "scopesim/scenegen.hpp"

using namespace scopesim;

namespace {

struct Fixture {
  std::shared_ptr<const PointCloudScene> scene;
  WaypointTrajectory expert;
  EnvConfig config;

  Fixture() {
    SceneSpec sspec;
    sspec.point_count = 8000;
    GeneratedScene generated = generate_scene(sspec, 91);
    config.obs_width = 40;
    config.obs_height = 32;
    DemoSpec dspec;
    const GeneratedDemo demo =
        generate_demonstration(generated, dspec, intrinsics_for(config), 3);
    const RawTrajectory smoothed = smooth(demo.trajectory, 7);
    expert = resample_equal_distance(smoothed, 1.0);
    scene = std::make_shared<const PointCloudScene>(std::move(generated.cloud));
  }

  Workspace tight_workspace() const {
    Workspace ws;
    ws.min_corner = ws.max_corner = expert.front().position();
    ws.orientation_range = {0, 0, 0};
    return ws;
  }

  Workspace sampled_workspace(std::uint64_t seed) const {
    Rng rng(seed);
    return workspace_from_trajectory(expert, AugmentationParams{}, rng);
  }

  SceneEnvironment make_env() const {
    return SceneEnvironment(scene, expert, sampled_workspace(5), config);
  }
};

bool images_equal(const RGBDImage& a, const RGBDImage& b) {
  return a.rgb == b.rgb && a.depth == b.depth;
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  Fixture f;
  SceneEnvironment env = f.make_env();
  const RGBDImage a = env.reset(123);
  const Pose pose_a = env.state().current_pose;
  const RGBDImage b = env.reset(123);
  CHECK(images_equal(a, b));
  CHECK(norm(pose_a.translation - env.state().current_pose.translation) == 0.0);
  const RGBDImage c = env.reset(124);
  CHECK_FALSE(images_equal(a, c));
}

TEST_CASE("zero-volume workspace starts at the expert head") {
  Fixture f;
  SceneEnvironment env(f.scene, f.expert, f.tight_workspace(), f.config);
  env.reset(7);
  const Pose start = euler_to_pose(f.expert.front());
  CHECK(norm(env.state().current_pose.translation - start.translation) < 1e-12);
  // acos-based geodesic of equal rotations carries ~1e-8 of rounding noise
  CHECK(rotation_geodesic(env.state().current_pose.rotation, start.rotation) < 1e-7);
}

TEST_CASE("sampled starts stay inside the workspace box") {
  Fixture f;
  SceneEnvironment env = f.make_env();
  const Workspace& ws = env.workspace();
  for (int i = 0; i < 1000; ++i) {
    env.reset(1000 + i);
    const Vec3 p = env.state().current_pose.translation;
    CHECK(ws.min_corner.x - 1e-12 <= p.x);
    CHECK(p.x <= ws.max_corner.x + 1e-12);
    CHECK(ws.min_corner.y - 1e-12 <= p.y);
    CHECK(p.y <= ws.max_corner.y + 1e-12);
    CHECK(ws.min_corner.z - 1e-12 <= p.z);
    CHECK(p.z <= ws.max_corner.z + 1e-12);
  }
}

TEST_CASE("zero action leaves pose and deviations unchanged") {
  Fixture f;
  SceneEnvironment env = f.make_env();
  env.reset(3);
  const Pose before = env.state().current_pose;
  const StepResult r1 = env.step({0, 0, 0, 0, 0, 0});
  CHECK(norm(env.state().current_pose.translation - before.translation) == 0.0);
  if (!r1.done) {
    const StepResult r2 = env.step({0, 0, 0, 0, 0, 0});
    CHECK(r2.delta_p == r1.delta_p);
    CHECK(r2.delta_r == r1.delta_r);
  }
}

TEST_CASE("starting within thresholds succeeds on the first step") {
  Fixture f;
  SceneEnvironment env(f.scene, f.expert, f.tight_workspace(), f.config);
  Pose near_goal = euler_to_pose(f.expert.back());
  near_goal.translation.x += 1.0;  // 1 mm, 0 deg from the goal
  env.reset_to(near_goal);
  const StepResult r = env.step({0, 0, 0, 0, 0, 0});
  CHECK(r.success);
  CHECK(r.done);
  CHECK(env.state().step_count == 1);
}

TEST_CASE("action clamping bounds single-step motion") {
  Fixture f;
  SceneEnvironment env = f.make_env();
  env.reset(8);
  const Pose before = env.state().current_pose;
  env.step({5.0, -5.0, 5.0, 5.0, -5.0, 5.0});  // out-of-range input is clamped
  const Pose after = env.state().current_pose;
  CHECK(norm(after.translation - before.translation) <=
        std::sqrt(3.0) * f.config.pos_action_limit_mm + 1e-9);
  CHECK(rotation_geodesic(after.rotation, before.rotation) <=
        3 * f.config.rot_action_limit_rad + 1e-9);
}

TEST_CASE("expert replay succeeds; full open-loop replay is exact") {
  Fixture f;
  SceneEnvironment env(f.scene, f.expert, f.tight_workspace(), f.config);
  env.reset_to(euler_to_pose(f.expert.front()));

  const auto actions = waypoint_actions(f.expert, f.config.action_limits());
  const ActionLimits limits = f.config.action_limits();
  StepResult last;
  int steps = 0;
  for (const Action& a : actions) {
    last = env.step(normalize_action(a, limits));
    ++steps;
    if (last.done) break;
  }
  // The episode ends as soon as both deviations drop below the thresholds,
  // which can happen a couple of 1 mm steps before the endpoint.
  CHECK(last.success);
  CHECK(steps <= static_cast<int>(actions.size()));
  CHECK(last.delta_p < f.config.pos_threshold_mm);

  // Stepping the remaining actions open-loop (fresh, wide-threshold env so
  // nothing terminates early) reproduces the endpoint exactly.
  EnvConfig wide = f.config;
  wide.pos_threshold_mm = 1e-9;
  wide.rot_threshold_rad = 1e-9;
  wide.max_steps = static_cast<int>(actions.size()) + 1;
  SceneEnvironment full(f.scene, f.expert, f.tight_workspace(), wide);
  full.reset_to(euler_to_pose(f.expert.front()));
  StepResult fr;
  for (const Action& a : actions) fr = full.step(normalize_action(a, limits));
  CHECK(fr.delta_p < 1e-6);
  CHECK(fr.delta_r < 1e-6);
}

TEST_CASE("episodes end at max_steps without success") {
  Fixture f;
  EnvConfig config = f.config;
  config.max_steps = 4;
  SceneEnvironment env(f.scene, f.expert, f.sampled_workspace(6), config);
  env.reset(1);
  StepResult r;
  for (int i = 0; i < 4; ++i) r = env.step({0, 0, 0, 0, 0, 0});
  CHECK(r.done);
  CHECK_FALSE(r.success);
  CHECK_THROWS_AS(env.step({0, 0, 0, 0, 0, 0}), std::logic_error);
}

TEST_CASE("depth channel is zeroed when observe_depth is off") {
  Fixture f;
  EnvConfig config = f.config;
  config.observe_depth = false;
  SceneEnvironment env(f.scene, f.expert, f.sampled_workspace(7), config);
  const RGBDImage obs = env.reset(2);
  for (float d : obs.depth) CHECK(d == 0.0f);
  double rgb_sum = 0.0;
  for (float c : obs.rgb) rgb_sum += c;
  CHECK(rgb_sum > 0.0);
}

TEST_CASE("vector env matches per-env traces and the serial oracle") {
  Fixture f;
  std::vector<SceneEnvironment> envs;
  for (int i = 0; i < 4; ++i) envs.push_back(f.make_env());
  VectorEnv vec(std::move(envs));

  std::vector<std::uint64_t> seeds{11, 12, 13, 14};
  const auto obs_par = vec.reset_all(seeds);

  SceneEnvironment solo = f.make_env();
  const RGBDImage solo_obs = solo.reset(12);
  CHECK(images_equal(obs_par[1], solo_obs));

  std::vector<std::array<double, 6>> actions(4, {0.2, -0.1, 0.3, 0.0, 0.1, -0.2});
  const auto step_par = vec.step_all(actions);
  const StepResult solo_step = solo.step(actions[1]);
  CHECK(images_equal(step_par[1].obs, solo_step.obs));
  CHECK(step_par[1].delta_p == solo_step.delta_p);

  VectorEnv vec2(std::invoke([&] {
    std::vector<SceneEnvironment> copies;
    for (int i = 0; i < 4; ++i) copies.push_back(f.make_env());
    return copies;
  }));
  const auto obs_serial = vec2.reset_all_serial(seeds);
  const auto step_serial = vec2.step_all_serial(actions);
  for (int i = 0; i < 4; ++i) {
    CHECK(images_equal(obs_par[i], obs_serial[i]));
    CHECK(images_equal(step_par[i].obs, step_serial[i].obs));
  }
}

TEST_CASE("vector env errors carry the environment index") {
  Fixture f;
  std::vector<SceneEnvironment> envs;
  envs.push_back(f.make_env());
  envs.push_back(f.make_env());
  VectorEnv vec(std::move(envs));
  vec.reset_all({1, 2});
  vec.env(1).state();  // fine
  // Drive env 1 to done, then step_all must fail mentioning env 1.
  while (!vec.env(1).state().done) vec.env(1).step({1, 1, 1, 0, 0, 0});
  try {
    vec.step_all({{0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}});
    FAIL("expected error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("env 1") != std::string::npos);
  }
}

TEST_CASE("manifest round-trip with overrides") {
  const auto dir = std::filesystem::temp_directory_path() / "scopesim_manifest_test";
  std::filesystem::create_directories(dir);
  std::vector<ManifestEntry> entries;
  ManifestEntry env_entry;
  env_entry.kind = ManifestEntry::Kind::Env;
  env_entry.scene_path = "scenes/a.scs";
  env_entry.trajectory_path = "trajs/a.traj";
  env_entry.overrides = {{"max_steps", "8"}, {"observe_depth", "false"}};
  entries.push_back(env_entry);
  ManifestEntry demo_entry;
  demo_entry.kind = ManifestEntry::Kind::Demo;
  demo_entry.scene_path = "scenes/a.scs";
  demo_entry.trajectory_path = "trajs/a_aug.traj";
  entries.push_back(demo_entry);

  const auto path = dir / "suite.manifest";
  write_manifest(path.string(), entries);
  const Manifest manifest = read_manifest(path.string());
  REQUIRE(manifest.entries.size() == 2);
  CHECK(manifest.envs().size() == 1);
  CHECK(manifest.demos().size() == 1);
  CHECK(manifest.directory == dir.string());

  const EnvConfig config = apply_overrides(EnvConfig{}, manifest.envs()[0]);
  CHECK(config.max_steps == 8);
  CHECK_FALSE(config.observe_depth);

  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest loader rejects malformed files") {
  const auto dir = std::filesystem::temp_directory_path() / "scopesim_manifest_bad";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.manifest";
  {
    std::ofstream out(path);
    out << "SCOPEMANIFEST 1\nenv scene=only.scs\n";
  }
  CHECK_THROWS(read_manifest(path.string()));
  {
    std::ofstream out(path);
    out << "something else\n";
  }
  CHECK_THROWS(read_manifest(path.string()));
  std::filesystem::remove_all(dir);
}
