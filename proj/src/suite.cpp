#include "scopesim/suite.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "scopesim/scenegen.hpp"

namespace fs = std::filesystem;

namespace scopesim {

namespace {

std::string scene_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", index);
  return buf;
}

void accumulate(std::vector<double>& values, double& mean, double& stddev) {
  mean = 0.0;
  stddev = 0.0;
  if (values.empty()) return;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  stddev = std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace

SuiteStats write_scene_suite(const std::string& out_dir, const RunConfig& config,
                             int count, int train_count) {
  if (count < 2 || train_count < 1 || train_count >= count)
    throw std::invalid_argument("write_scene_suite: bad count/split");
  const fs::path out(out_dir);
  fs::create_directories(out / "scenes");
  fs::create_directories(out / "trajs");

  const CameraIntrinsics intrinsics = intrinsics_for(config.env);
  std::vector<ManifestEntry> train_entries, test_entries;
  std::vector<double> distances, steps, points;

  for (int i = 0; i < count; ++i) {
    const GeneratedScene scene =
        generate_scene(config.scene, Rng::derive(config.master_seed, "scene", i));
    const std::string name = scene_name(i);
    save_scene(scene.cloud, (out / "scenes" / (name + ".scs")).string());

    const bool is_train = i < train_count;
    const int demo_count = is_train ? config.demos_per_train_scene : 1;
    for (int d = 0; d < demo_count; ++d) {
      const GeneratedDemo demo = generate_demonstration(
          scene, config.demo, intrinsics,
          Rng::derive(config.master_seed, "demo",
                      (static_cast<std::uint64_t>(i) << 16) | d));
      char suffix[24];
      std::snprintf(suffix, sizeof(suffix), "_demo%02d.traj", d);
      write_trajectory((out / "trajs" / (name + suffix)).string(), demo.trajectory,
                       {{"scene", name}});

      ManifestEntry entry;
      entry.kind = ManifestEntry::Kind::Env;
      entry.scene_path = "scenes/" + name + ".scs";
      entry.trajectory_path = "trajs/" + name + suffix;
      (is_train ? train_entries : test_entries).push_back(entry);

      distances.push_back(norm(demo.goal.translation - demo.start.translation));
      const WaypointTrajectory wp = resample_equal_distance(
          smooth(demo.trajectory, config.pre.smooth_window), config.pre.d_fixed_mm);
      steps.push_back(static_cast<double>(wp.size() - 1));
    }
    points.push_back(static_cast<double>(scene.cloud.size()) / 1e5);
  }

  write_manifest((out / "train.manifest").string(), train_entries);
  write_manifest((out / "test.manifest").string(), test_entries);
  save_config((out / "config.cfg").string(), config);

  SuiteStats stats;
  stats.scenes = count;
  stats.train_scenes = train_count;
  stats.test_scenes = count - train_count;
  accumulate(distances, stats.distance_mean, stats.distance_std);
  accumulate(steps, stats.steps_mean, stats.steps_std);
  accumulate(points, stats.points_1e5_mean, stats.points_1e5_std);
  return stats;
}

AugmentAudit write_augmented_suite(const std::string& out_dir, const Manifest& manifest,
                                   const RunConfig& config) {
  const fs::path out(out_dir);
  const fs::path in_dir(manifest.directory);
  fs::create_directories(out / "trajs");

  std::vector<ManifestEntry> entries;
  std::vector<double> endpoint_devs, shape_scores;
  AugmentAudit audit;

  const auto env_entries = manifest.envs();
  audit.demonstrations = env_entries.size();
  for (std::size_t i = 0; i < env_entries.size(); ++i) {
    const ManifestEntry& src = env_entries[i];
    const WaypointTrajectory wp =
        load_waypoints((in_dir / src.trajectory_path).string(), config.pre);
    const std::string stem = fs::path(src.trajectory_path).stem().string();
    const std::string scene_rel =
        fs::relative(fs::absolute(in_dir / src.scene_path), fs::absolute(out)).string();

    const std::string wp_rel = "trajs/" + stem + "_wp.traj";
    write_trajectory((out / wp_rel).string(), wp, {{"scene", stem}});
    ManifestEntry env_entry = src;
    env_entry.scene_path = scene_rel;
    env_entry.trajectory_path = wp_rel;
    entries.push_back(env_entry);

    const auto augmented =
        augment_dataset({wp}, config.spta, Rng::derive(config.master_seed, "spta", i),
                        config.env.action_limits());
    for (std::size_t k = 0; k < augmented.size(); ++k) {
      const AugmentedTrajectory& aug = augmented[k];
      std::string rel = wp_rel;  // the original entry reuses the processed file
      if (aug.info) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%03zu", k);
        rel = "trajs/" + stem + "_aug" + buf + ".traj";
        std::map<std::string, std::string> header{{"scene", stem}};
        header["source"] = wp_rel;
        header["epsilon"] = std::to_string(aug.info->epsilon);
        header["gamma"] = std::to_string(aug.info->gamma);
        header["k"] = std::to_string(aug.info->k);
        header["seed"] = std::to_string(aug.info->seed);
        write_trajectory((out / rel).string(), aug.trajectory, header);

        endpoint_devs.push_back(
            norm(aug.trajectory.back().position() - wp.back().position()));
        double cos_sum = 0.0;
        int cos_count = 0;
        for (std::size_t j = 0; j + 1 < aug.trajectory.size(); ++j) {
          const Vec3 da = aug.trajectory.waypoints[j + 1].position() -
                          aug.trajectory.waypoints[j].position();
          const Vec3 dr = wp.waypoints[aug.info->j_star + j + 1].position() -
                          wp.waypoints[aug.info->j_star + j].position();
          const double na = norm(da), nr = norm(dr);
          if (na < 1e-12 || nr < 1e-12) continue;
          cos_sum += dot(da, dr) / (na * nr);
          ++cos_count;
        }
        if (cos_count) shape_scores.push_back(cos_sum / cos_count);
      }
      ManifestEntry demo_entry;
      demo_entry.kind = ManifestEntry::Kind::Demo;
      demo_entry.scene_path = scene_rel;
      demo_entry.trajectory_path = rel;
      entries.push_back(demo_entry);
    }
  }

  write_manifest((out / "augmented.manifest").string(), entries);
  save_config((out / "config.cfg").string(), config);

  audit.augmented = endpoint_devs.size();
  accumulate(endpoint_devs, audit.endpoint_dev_mean, audit.endpoint_dev_std);
  accumulate(shape_scores, audit.shape_cos_mean, audit.shape_cos_std);
  for (double v : endpoint_devs) audit.endpoint_dev_max = std::max(audit.endpoint_dev_max, v);
  for (double v : shape_scores) audit.shape_cos_min = std::min(audit.shape_cos_min, v);
  return audit;
}

}  // namespace scopesim
