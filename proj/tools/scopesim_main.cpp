// scopesim: desk-scale laparoscope view-control training toolkit.
//
// Commands: gen-scenes, augment, train (bc|gail|illc), eval, preview.
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "scopesim/config.hpp"
#include "scopesim/eval.hpp"
#include "scopesim/scenegen.hpp"
#include "scopesim/suite.hpp"

namespace fs = std::filesystem;
using namespace scopesim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "configuration file");
  cmd->add_option("--set", options.overrides, "config override key=value")
      ->type_name("KEY=VALUE");
  cmd->add_option("--seed", options.seed, "master seed override")
      ->each([&options](const std::string&) { options.seed_set = true; });
}

RunConfig resolve_config(const CommonOptions& options) {
  RunConfig config =
      options.config_path.empty() ? RunConfig{} : load_config(options.config_path);
  for (const std::string& item : options.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + item + "'");
    apply_config_override(config, item.substr(0, eq), item.substr(eq + 1));
  }
  if (options.seed_set) config.master_seed = options.seed;
  return config;
}

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

std::string scene_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", index);
  return buf;
}

// ---- gen-scenes -------------------------------------------------------------

struct GenScenesArgs {
  CommonOptions common;
  std::string out_dir;
  int count = 10;
  std::string split = "8:2";
};

int run_gen_scenes(const GenScenesArgs& args) {
  RunConfig config;
  int train_count = 0, test_count = 0;
  try {
    config = resolve_config(args.common);
    if (args.count < 2) throw std::invalid_argument("--count must be >= 2");
    if (std::sscanf(args.split.c_str(), "%d:%d", &train_count, &test_count) != 2 ||
        train_count < 1 || test_count < 1 || train_count + test_count != args.count)
      throw std::invalid_argument("--split must be A:B with A+B == count");
  } catch (const std::exception& e) {
    std::cerr << "gen-scenes: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const SuiteStats stats =
        write_scene_suite(args.out_dir, config, args.count, train_count);
    std::printf("suite statistics (%d scenes: %d train / %d test)\n", stats.scenes,
                stats.train_scenes, stats.test_scenes);
    std::printf("  point number / 1e5   %.2f +/- %.2f\n", stats.points_1e5_mean,
                stats.points_1e5_std);
    std::printf("  distance / mm        %.2f +/- %.2f\n", stats.distance_mean,
                stats.distance_std);
    std::printf("  steps                %.2f +/- %.2f\n", stats.steps_mean,
                stats.steps_std);
    std::printf("  duration / sec       %.2f\n", config.demo.duration_s);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "gen-scenes: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const fs::path out(args.out_dir);
    fs::create_directories(out / "scenes");
    fs::create_directories(out / "trajs");

    const CameraIntrinsics intrinsics = intrinsics_for(config.env);
    std::vector<ManifestEntry> train_entries, test_entries;
    std::vector<double> distances, steps, points;

    for (int i = 0; i < args.count; ++i) {
      const GeneratedScene scene = generate_scene(
          config.scene, Rng::derive(config.master_seed, "scene", i));
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
        write_trajectory((out / "trajs" / (name + suffix)).string(),
                         demo.trajectory, {{"scene", name}});

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

    const Stats d = stats_of(distances), s = stats_of(steps), p = stats_of(points);
    std::printf("suite statistics (%d scenes: %d train / %d test)\n", args.count,
                train_count, test_count);
    std::printf("  point number / 1e5   %.2f +/- %.2f\n", p.mean, p.stddev);
    std::printf("  distance / mm        %.2f +/- %.2f\n", d.mean, d.stddev);
    std::printf("  steps                %.2f +/- %.2f\n", s.mean, s.stddev);
    std::printf("  duration / sec       %.2f\n", config.demo.duration_s);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "gen-scenes: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---- augment ----------------------------------------------------------------

struct AugmentArgs {
  CommonOptions common;
  std::string in_manifest;
  std::string out_dir;
  int rate = -1;  // -1: take from config
};

int run_augment(const AugmentArgs& args) {
  RunConfig config;
  Manifest manifest;
  try {
    config = resolve_config(args.common);
    if (args.rate >= 1)
      config.spta.rate = args.rate;
    else if (args.rate != -1)
      throw std::invalid_argument("--rate must be >= 1");
    manifest = read_manifest(args.in_manifest);
    if (manifest.envs().empty())
      throw std::invalid_argument("manifest has no env entries");
    for (const ManifestEntry& entry : manifest.envs())
      read_trajectory((fs::path(manifest.directory) / entry.trajectory_path).string());
  } catch (const std::exception& e) {
    std::cerr << "augment: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const AugmentAudit audit = write_augmented_suite(args.out_dir, manifest, config);
    std::printf("augmented %zu trajectories (rate %d) from %zu demonstrations\n",
                audit.augmented, config.spta.rate, audit.demonstrations);
    std::printf("  endpoint deviation / mm   %.4f +/- %.4f (max %.4f)\n",
                audit.endpoint_dev_mean, audit.endpoint_dev_std, audit.endpoint_dev_max);
    std::printf("  step-direction cosine     %.4f +/- %.4f (min %.4f)\n",
                audit.shape_cos_mean, audit.shape_cos_std, audit.shape_cos_min);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "augment: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  CommonOptions common;
  std::string algorithm;
  std::string envs_manifest;
  std::string demos_manifest;
  std::string test_manifest;
  std::string out_dir;
  bool ablation = false;
  int checkpoint_every = 0;
};

DemoDataset demos_from_manifest(const Manifest& manifest, const RunConfig& config) {
  Manifest effective = manifest;
  if (manifest.demos().empty()) {
    // raw suite manifests carry only env entries; treat them as demonstrations
    effective.entries.clear();
    for (ManifestEntry entry : manifest.envs()) {
      entry.kind = ManifestEntry::Kind::Demo;
      effective.entries.push_back(entry);
    }
  }
  return build_demo_dataset(effective, config.env, config.pre,
                            config.train.depth_scale_mm);
}

int run_train(const TrainArgs& args) {
  RunConfig config;
  Manifest envs_manifest, demos_manifest, test_manifest;
  try {
    config = resolve_config(args.common);
    config.train.seed = Rng::derive(config.master_seed, "train");
    if (args.algorithm != "bc" && args.algorithm != "gail" && args.algorithm != "illc")
      throw std::invalid_argument("algorithm must be bc, gail, or illc");
    demos_manifest = read_manifest(args.demos_manifest);
    if (args.algorithm != "bc" || args.ablation) {
      envs_manifest = read_manifest(args.envs_manifest);
      if (envs_manifest.envs().empty())
        throw std::invalid_argument("--envs manifest has no env entries");
    }
    if (args.ablation) {
      if (args.algorithm != "illc")
        throw std::invalid_argument("--ablation applies to 'train illc' only");
      test_manifest = read_manifest(args.test_manifest);
      if (test_manifest.envs().empty())
        throw std::invalid_argument("--test manifest has no env entries");
    }
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const fs::path out(args.out_dir);
    fs::create_directories(out);
    save_config((out / "config.cfg").string(), config);

    if (args.ablation) {
      AblationConfig ablation;
      ablation.train_manifest = envs_manifest;
      ablation.test_manifest = test_manifest;
      ablation.env_config = config.env;
      ablation.pre = config.pre;
      ablation.spta = config.spta;
      ablation.train = config.train;
      ablation.episodes_per_scene = config.eval_episodes;
      ablation.seed = config.master_seed;
      const AblationResult result = run_ablation(ablation, &std::cout);
      write_ablation_table((out / "ablation.tsv").string(), result);
      write_rate_curve((out / "spta_rate_curve.tsv").string(), result);
      std::printf("ablation table written to %s\n",
                  (out / "ablation.tsv").string().c_str());
      return kExitOk;
    }

    const NetworkSpec policy_spec =
        NetworkSpec::policy(4, config.env.obs_height, config.env.obs_width);
    Network policy(policy_spec);
    Parameters params =
        policy.init_params(Rng::derive(config.master_seed, "policy-init"));
    const DemoDataset demos = demos_from_manifest(demos_manifest, config);
    std::ofstream log((out / "train.log").string());

    auto save_policy = [&](const Parameters& p, std::int64_t steps,
                           const std::string& name) {
      Checkpoint ckpt;
      ckpt.spec = policy_spec;
      ckpt.seed = config.master_seed;
      ckpt.steps = steps;
      ckpt.params = p;
      save_checkpoint((out / name).string(), ckpt);
    };

    if (args.algorithm == "bc") {
      const BcResult result =
          train_bc(policy, params, demos, config.train, config.train.bc_epochs);
      for (std::size_t e = 0; e < result.loss_per_epoch.size(); ++e)
        log << "epoch=" << e << " bc_loss=" << result.loss_per_epoch[e] << "\n";
      save_policy(params, config.train.bc_epochs, "policy.net");
      std::printf("bc: %d epochs on %zu tuples -> %s\n", config.train.bc_epochs,
                  demos.size(), (out / "policy.net").string().c_str());
      return kExitOk;
    }

    std::vector<SceneEnvironment> env_list =
        load_environments(envs_manifest, config.env, config.pre, config.spta,
                          Rng::derive(config.master_seed, "env"));
    VectorEnv envs(std::move(env_list));

    if (config.train.prior_policy && config.train.bc_epochs > 0)
      train_bc(policy, params, demos, config.train, config.train.bc_epochs);
    save_policy(params, 0, "policy_prior.net");

    IterationHook hook;
    if (args.checkpoint_every > 0) {
      hook = [&](const IterRecord& record, const Parameters& p) {
        if ((record.iteration + 1) % args.checkpoint_every == 0) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "ckpt_%04d.net", record.iteration + 1);
          save_policy(p, record.iteration + 1, buf);
        }
      };
    }

    IllcResult result;
    if (args.algorithm == "illc") {
      Discriminator disc(
          NetworkSpec::reward(4, config.env.obs_height, config.env.obs_width),
          config.train.discount, Rng::derive(config.master_seed, "disc"));
      result = train_illc(policy, std::move(params), disc, envs, demos, config.train,
                          &log, hook);
      save_checkpoint((out / "disc_rb.net").string(),
                      Checkpoint{disc.spec, config.master_seed,
                                 config.train.iterations, disc.rb_params});
      save_checkpoint((out / "disc_h.net").string(),
                      Checkpoint{disc.spec, config.master_seed,
                                 config.train.iterations, disc.h_params});
    } else {
      GailDiscriminator disc(
          NetworkSpec::state_action_classifier(4, config.env.obs_height,
                                               config.env.obs_width),
          Rng::derive(config.master_seed, "disc"));
      result = train_gail(policy, std::move(params), disc, envs, demos, config.train,
                          &log, hook);
      save_checkpoint((out / "disc_gail.net").string(),
                      Checkpoint{disc.spec, config.master_seed,
                                 config.train.iterations, disc.params});
    }
    save_policy(result.policy, config.train.iterations, "policy.net");
    std::printf("%s: %d iterations, final train SR %.1f%% -> %s\n",
                args.algorithm.c_str(), config.train.iterations,
                result.log.empty() ? 0.0f : result.log.back().train_sr,
                (out / "policy.net").string().c_str());
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  CommonOptions common;
  std::string manifest_path;
  std::string policy_path;
  std::string controller = "policy";
  std::string out_prefix;
  std::string features_path;
  int episodes = -1;
};

int run_eval(const EvalArgs& args) {
  RunConfig config;
  Manifest manifest;
  try {
    config = resolve_config(args.common);
    if (args.episodes > 0) config.eval_episodes = args.episodes;
    manifest = read_manifest(args.manifest_path);
    if (manifest.envs().empty())
      throw std::invalid_argument("manifest has no env entries");
    if (args.controller == "policy" && args.policy_path.empty())
      throw std::invalid_argument("--policy is required for the policy controller");
    if (args.controller != "policy" && args.controller != "random" &&
        args.controller != "oracle")
      throw std::invalid_argument("--controller must be policy, random, or oracle");
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    std::vector<SceneEnvironment> envs =
        load_environments(manifest, config.env, config.pre, config.spta,
                          Rng::derive(config.master_seed, "env"));

    EvalOptions options;
    options.episodes_per_scene = config.eval_episodes;
    options.seed = Rng::derive(config.master_seed, "eval");
    options.policy_id = args.controller == "policy"
                            ? fs::path(args.policy_path).filename().string()
                            : args.controller;

    std::unique_ptr<Controller> controller;
    Checkpoint ckpt;
    std::unique_ptr<Network> policy;
    if (args.controller == "policy") {
      ckpt = load_checkpoint(args.policy_path);
      policy = std::make_unique<Network>(ckpt.spec);
      controller = std::make_unique<PolicyController>(*policy, ckpt.params,
                                                      config.train.depth_scale_mm);
    } else if (args.controller == "random") {
      controller = std::make_unique<RandomController>(
          Rng::derive(config.master_seed, "random-controller"));
    } else {
      std::vector<std::vector<std::array<double, 6>>> plans;
      for (const SceneEnvironment& env : envs) {
        const auto actions = waypoint_actions(env.expert(), config.env.action_limits());
        std::vector<std::array<double, 6>> plan;
        for (const Action& a : actions)
          plan.push_back(normalize_action(a, config.env.action_limits()));
        plans.push_back(std::move(plan));
      }
      controller = std::make_unique<ReplayController>(std::move(plans));
      options.start_at_expert = true;
    }

    const EvaluationReport report = evaluate_policy(*controller, envs, options);
    write_report(args.out_prefix + ".txt", report);
    write_report_tsv(args.out_prefix + ".tsv", report);
    std::printf("eval[%s]: SR %.2f +/- %.2f %% | steps %.2f +/- %.2f | scenes %zu\n",
                options.policy_id.c_str(), report.sr_mean, report.sr_std,
                report.steps_mean, report.steps_std, report.scenes.size());

    if (!args.features_path.empty()) {
      if (!policy) throw std::runtime_error("--export-features needs --policy");
      // feature rows for every expert waypoint observation of the suite
      const std::size_t features =
          obs_feature_count(config.env.obs_width, config.env.obs_height);
      std::vector<float> storage;
      int rows = 0;
      for (SceneEnvironment& env : envs) {
        for (const EulerPose& wp : env.expert().waypoints) {
          const RGBDImage obs = env.reset_to(euler_to_pose(wp));
          storage.resize(storage.size() + features);
          obs_to_row(obs, config.train.depth_scale_mm,
                     std::span<float>(storage.data() + storage.size() - features,
                                      features));
          ++rows;
        }
      }
      Tensor obs_tensor;
      obs_tensor.shape = {rows, static_cast<int>(features)};
      obs_tensor.data = std::move(storage);
      write_features_tsv(args.features_path,
                         export_features(*policy, ckpt.params, obs_tensor));
      std::printf("features: %d rows -> %s\n", rows, args.features_path.c_str());
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// ---- preview -----------------------------------------------------------------

struct PreviewArgs {
  CommonOptions common;
  std::string scene_path;
  std::string pose_text;
  std::string trajectory_path;
  std::string out_prefix;
};

int run_preview(const PreviewArgs& args) {
  RunConfig config;
  EulerPose pose;
  bool have_pose = false;
  try {
    config = resolve_config(args.common);
    if (!args.pose_text.empty()) {
      double deg[3] = {0, 0, 0};
      if (std::sscanf(args.pose_text.c_str(), "%lf %lf %lf %lf %lf %lf", &pose.x,
                      &pose.y, &pose.z, &deg[0], &deg[1], &deg[2]) != 6)
        throw std::invalid_argument("--pose expects \"x y z alpha beta gamma\" (deg)");
      pose.alpha = deg_to_rad(deg[0]);
      pose.beta = deg_to_rad(deg[1]);
      pose.gamma = deg_to_rad(deg[2]);
      have_pose = true;
    }
    if (have_pose == !args.trajectory_path.empty())
      throw std::invalid_argument("provide exactly one of --pose or --trajectory");
  } catch (const std::exception& e) {
    std::cerr << "preview: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const PointCloudScene scene = load_scene(args.scene_path);
    const CameraIntrinsics intrinsics = intrinsics_for(config.env);

    auto render_one = [&](const EulerPose& p, const std::string& prefix) {
      if (!scene.bounds.contains(p.position(), 10.0))
        std::cerr << "preview: warning: pose lies outside the scene bounds\n";
      const RGBDImage img =
          render(scene, euler_to_pose(p), intrinsics, config.env.splat_radius);
      write_ppm(img, prefix + ".ppm");
      write_pgm16(img, prefix + ".pgm");
    };

    if (have_pose) {
      render_one(pose, args.out_prefix);
      std::printf("preview written to %s.ppm / %s.pgm\n", args.out_prefix.c_str(),
                  args.out_prefix.c_str());
    } else {
      const TrajectoryFile file = read_trajectory(args.trajectory_path);
      for (std::size_t i = 0; i < file.trajectory.points.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "_%04zu", i);
        render_one(file.trajectory.points[i], args.out_prefix + buf);
      }
      std::printf("%zu frames written to %s_*.ppm\n", file.trajectory.points.size(),
                  args.out_prefix.c_str());
    }
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "preview: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale laparoscope view-control training toolkit"};
  app.require_subcommand(1);

  GenScenesArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-scenes",
                                     "generate scenes, demonstrations, and manifests");
  add_common(gen, gen_args.common);
  gen->add_option("--out", gen_args.out_dir, "output directory")->required();
  gen->add_option("--count", gen_args.count, "number of scenes");
  gen->add_option("--split", gen_args.split, "train:test split (e.g. 8:2)");

  AugmentArgs aug_args;
  CLI::App* aug = app.add_subcommand(
      "augment", "preprocess demonstrations and expand them with SPTA");
  add_common(aug, aug_args.common);
  aug->add_option("--in", aug_args.in_manifest, "input manifest")->required();
  aug->add_option("--out", aug_args.out_dir, "output directory")->required();
  aug->add_option("--rate", aug_args.rate, "augmentations per demonstration");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a policy (bc | gail | illc)");
  add_common(train, train_args.common);
  train->add_option("algorithm", train_args.algorithm, "bc, gail, or illc")
      ->required();
  train->add_option("--envs", train_args.envs_manifest, "environment manifest");
  train->add_option("--demos", train_args.demos_manifest, "demonstration manifest")
      ->required();
  train->add_option("--test", train_args.test_manifest, "test manifest (ablation)");
  train->add_option("--out", train_args.out_dir, "output directory")->required();
  train->add_flag("--ablation", train_args.ablation, "run the ablation suite");
  train->add_option("--checkpoint-every", train_args.checkpoint_every,
                    "checkpoint interval in iterations");

  EvalArgs eval_args;
  CLI::App* evalc = app.add_subcommand("eval", "evaluate a policy on a manifest");
  add_common(evalc, eval_args.common);
  evalc->add_option("--manifest", eval_args.manifest_path, "environment manifest")
      ->required();
  evalc->add_option("--policy", eval_args.policy_path, "policy checkpoint");
  evalc->add_option("--controller", eval_args.controller, "policy, random, or oracle");
  evalc->add_option("--episodes", eval_args.episodes, "episodes per scene");
  evalc->add_option("--out", eval_args.out_prefix, "report path prefix")->required();
  evalc->add_option("--export-features", eval_args.features_path,
                    "write last-hidden-layer features to this file");

  PreviewArgs preview_args;
  CLI::App* preview = app.add_subcommand("preview", "render RGB/depth previews");
  add_common(preview, preview_args.common);
  preview->add_option("--scene", preview_args.scene_path, "scene file")->required();
  preview->add_option("--pose", preview_args.pose_text,
                      "camera pose \"x y z alpha beta gamma\" (mm, deg)");
  preview->add_option("--trajectory", preview_args.trajectory_path,
                      "render every pose of a trajectory file");
  preview->add_option("--out", preview_args.out_prefix, "output path prefix")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (gen->parsed()) return run_gen_scenes(gen_args);
  if (aug->parsed()) return run_augment(aug_args);
  if (train->parsed()) return run_train(train_args);
  if (evalc->parsed()) return run_eval(eval_args);
  if (preview->parsed()) return run_preview(preview_args);
  return kExitUsage;
}
