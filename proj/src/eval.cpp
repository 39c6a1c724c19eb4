#include "scopesim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

namespace scopesim {

double success_rate(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("success_rate: no records");
  double successes = 0.0;
  for (const EpisodeRecord& r : records) successes += r.success ? 1.0 : 0.0;
  return 100.0 * successes / static_cast<double>(records.size());
}

std::optional<double> action_efficiency(const std::vector<EpisodeRecord>& records) {
  double sum = 0.0;
  int successes = 0;
  for (const EpisodeRecord& r : records) {
    if (!r.success) continue;
    const Vec3 displacement = r.poses.back().position() - r.start.position();
    sum += norm(displacement) / static_cast<double>(r.steps);
    ++successes;
  }
  if (successes == 0) return std::nullopt;
  return sum / successes;
}

// ---- controllers ----------------------------------------------------------------

PolicyController::PolicyController(const Network& policy, const Parameters& params,
                                   float depth_scale_mm)
    : policy_(&policy), params_(&params), depth_scale_mm_(depth_scale_mm) {}

std::unique_ptr<Controller> PolicyController::clone() const {
  return std::make_unique<PolicyController>(*policy_, *params_, depth_scale_mm_);
}

std::array<double, 6> PolicyController::act(const RGBDImage& obs) {
  Tensor input({1, static_cast<int>(obs_feature_count(obs.width, obs.height))});
  obs_to_row(obs, depth_scale_mm_, std::span<float>(input.data));
  const auto outputs = policy_->forward(*params_, input);
  std::array<double, 6> action{};
  const std::size_t dim = std::min<std::size_t>(6, outputs[0].data.size());
  for (std::size_t c = 0; c < dim; ++c)
    action[c] = std::tanh(static_cast<double>(outputs[0].data[c]));
  return action;
}

RandomController::RandomController(std::uint64_t seed) : seed_(seed) {}

std::unique_ptr<Controller> RandomController::clone() const {
  return std::make_unique<RandomController>(seed_);
}

void RandomController::begin_episode(int scene_index, int episode_index) {
  rng_.emplace(Rng::derive(seed_, "random-episode",
                           (static_cast<std::uint64_t>(scene_index) << 20) |
                               static_cast<std::uint64_t>(episode_index)));
}

std::array<double, 6> RandomController::act(const RGBDImage&) {
  std::array<double, 6> action{};
  for (double& a : action) a = rng_->uniform(-1.0, 1.0);
  return action;
}

ReplayController::ReplayController(
    std::vector<std::vector<std::array<double, 6>>> per_scene)
    : per_scene_(std::move(per_scene)) {}

std::unique_ptr<Controller> ReplayController::clone() const {
  return std::make_unique<ReplayController>(per_scene_);
}

void ReplayController::begin_episode(int scene_index, int) {
  scene_ = scene_index;
  cursor_ = 0;
}

std::array<double, 6> ReplayController::act(const RGBDImage&) {
  const auto& actions = per_scene_.at(static_cast<std::size_t>(scene_));
  if (cursor_ >= actions.size()) return {};
  return actions[cursor_++];
}

// ---- evaluation ------------------------------------------------------------------

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

Moments moments(const std::vector<double>& values) {
  Moments m;
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return m;
}

std::vector<EpisodeRecord> run_scene(Controller& controller, SceneEnvironment& env,
                                     int scene_index, const EvalOptions& options) {
  std::vector<EpisodeRecord> records;
  records.reserve(options.episodes_per_scene);
  for (int episode = 0; episode < options.episodes_per_scene; ++episode) {
    controller.begin_episode(scene_index, episode);
    RGBDImage obs;
    if (options.start_at_expert)
      obs = env.reset_to(euler_to_pose(env.expert().front()));
    else
      obs = env.reset(Rng::derive(options.seed, "eval-episode",
                                  (static_cast<std::uint64_t>(scene_index) << 20) |
                                      static_cast<std::uint64_t>(episode)));
    EpisodeRecord record;
    record.scene_index = scene_index;
    record.start = pose_to_euler(env.state().current_pose);

    StepResult result;
    do {
      const std::array<double, 6> action = controller.act(obs);
      result = env.step(action);
      obs = result.obs;
      record.actions.push_back(action);
      record.poses.push_back(pose_to_euler(env.state().current_pose));
    } while (!result.done);

    record.steps = env.state().step_count;
    record.success = result.success;
    record.final_delta_p = result.delta_p;
    record.final_delta_r = result.delta_r;
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace

EvaluationReport evaluate_policy(const Controller& controller,
                                 std::vector<SceneEnvironment>& envs,
                                 const EvalOptions& options) {
  if (envs.empty()) throw std::invalid_argument("evaluate_policy: no environments");
  if (options.episodes_per_scene < 1)
    throw std::invalid_argument("evaluate_policy: episodes_per_scene must be >= 1");

  std::vector<std::vector<EpisodeRecord>> per_scene(envs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(envs.size()); ++s) {
    const std::unique_ptr<Controller> worker = controller.clone();
    per_scene[s] = run_scene(*worker, envs[s], static_cast<int>(s), options);
  }

  EvaluationReport report;
  report.policy_id = options.policy_id;
  report.seed = options.seed;

  std::vector<double> scene_sr, scene_steps, scene_aeff;
  for (std::size_t s = 0; s < envs.size(); ++s) {
    SceneReport scene;
    scene.scene_id = "scene_" + std::to_string(s);
    scene.episodes = static_cast<int>(per_scene[s].size());
    scene.sr = success_rate(per_scene[s]);
    std::vector<double> steps;
    for (const EpisodeRecord& r : per_scene[s]) steps.push_back(r.steps);
    const Moments step_m = moments(steps);
    scene.steps_mean = step_m.mean;
    scene.steps_std = step_m.stddev;
    scene.a_eff = action_efficiency(per_scene[s]);
    report.scenes.push_back(scene);

    scene_sr.push_back(scene.sr);
    scene_steps.push_back(scene.steps_mean);
    if (scene.a_eff) scene_aeff.push_back(*scene.a_eff);
    for (EpisodeRecord& r : per_scene[s]) report.records.push_back(std::move(r));
  }

  const Moments sr_m = moments(scene_sr);
  report.sr_mean = sr_m.mean;
  report.sr_std = sr_m.stddev;
  const Moments steps_m = moments(scene_steps);
  report.steps_mean = steps_m.mean;
  report.steps_std = steps_m.stddev;
  if (!scene_aeff.empty()) {
    const Moments aeff_m = moments(scene_aeff);
    report.a_eff_mean = aeff_m.mean;
    report.a_eff_std = aeff_m.stddev;
  }
  return report;
}

namespace {

std::string format_aeff(const std::optional<double>& a_eff) {
  if (!a_eff) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", *a_eff);
  return buf;
}

}  // namespace

void write_report(const std::string& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "policy " << report.policy_id << "\n";
  out << "seed " << report.seed << "\n";
  out << "scenes " << report.scenes.size() << "\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "aggregate sr %.2f +/- %.2f %% | steps %.2f +/- %.2f | a_eff %s +/- %.4f\n",
                report.sr_mean, report.sr_std, report.steps_mean, report.steps_std,
                format_aeff(report.a_eff_mean).c_str(), report.a_eff_std);
  out << buf;
  for (const SceneReport& scene : report.scenes) {
    std::snprintf(buf, sizeof(buf),
                  "%s episodes %d sr %.2f %% steps %.2f +/- %.2f a_eff %s\n",
                  scene.scene_id.c_str(), scene.episodes, scene.sr, scene.steps_mean,
                  scene.steps_std, format_aeff(scene.a_eff).c_str());
    out << buf;
  }
}

void write_report_tsv(const std::string& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "scene\tepisodes\tsr_percent\tsteps_mean\tsteps_std\ta_eff_mm\n";
  char buf[256];
  for (const SceneReport& scene : report.scenes) {
    std::snprintf(buf, sizeof(buf), "%s\t%d\t%.6f\t%.6f\t%.6f\t%s\n",
                  scene.scene_id.c_str(), scene.episodes, scene.sr, scene.steps_mean,
                  scene.steps_std, format_aeff(scene.a_eff).c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "aggregate\t%zu\t%.6f\t%.6f\t%.6f\t%s\n",
                report.scenes.size(), report.sr_mean, report.steps_mean,
                report.steps_std, format_aeff(report.a_eff_mean).c_str());
  out << buf;
}

// ---- feature export ---------------------------------------------------------------

Tensor export_features(const Network& policy, const Parameters& params,
                       const Tensor& observations) {
  Network::Cache cache;
  policy.forward(params, observations, nullptr, &cache);
  return policy.features(cache);
}

void write_features_tsv(const std::string& path, const Tensor& features) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write features: " + path);
  const int n = features.batch();
  const std::size_t width = features.row_size();
  char buf[32];
  for (int i = 0; i < n; ++i) {
    const auto row = features.row(i);
    for (std::size_t c = 0; c < width; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[c]));
      out << buf << (c + 1 == width ? '\n' : '\t');
    }
  }
}

std::uint64_t parameter_checksum(const Parameters& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(params.values.data());
  for (std::size_t i = 0; i < params.values.size() * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---- ablation -----------------------------------------------------------------------

namespace {

struct SceneCache {
  std::map<std::string, std::shared_ptr<const PointCloudScene>> scenes;

  std::shared_ptr<const PointCloudScene> get(const std::string& path) {
    auto it = scenes.find(path);
    if (it == scenes.end()) {
      auto scene = std::make_shared<PointCloudScene>(load_scene(path));
      it = scenes.emplace(path, std::move(scene)).first;
    }
    return it->second;
  }
};

struct CellSetup {
  std::vector<SceneEnvironment> train_envs;
  std::vector<SceneEnvironment> test_envs;
  DemoDataset demos;
};

CellSetup build_cell(const AblationConfig& config, SceneCache& cache, int spta_rate,
                     bool depth) {
  EnvConfig env_config = config.env_config;
  env_config.observe_depth = depth;

  CellSetup cell;
  const std::filesystem::path train_dir(config.train_manifest.directory);

  std::vector<std::shared_ptr<const PointCloudScene>> scenes;
  std::vector<WaypointTrajectory> experts;
  for (const ManifestEntry& entry : config.train_manifest.envs()) {
    scenes.push_back(cache.get((train_dir / entry.scene_path).string()));
    experts.push_back(
        load_waypoints((train_dir / entry.trajectory_path).string(), config.pre));
  }

  std::vector<DemoSource> sources;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (spta_rate >= 1) {
      AugmentationParams params = config.spta;
      params.rate = spta_rate;
      const auto augmented = augment_dataset(
          {experts[i]}, params, Rng::derive(config.seed, "spta", i),
          env_config.action_limits());
      for (const auto& entry : augmented)
        sources.push_back(DemoSource{scenes[i].get(), entry.trajectory});
    } else {
      sources.push_back(DemoSource{scenes[i].get(), experts[i]});
    }
  }
  cell.demos = build_demo_dataset(sources, env_config, config.train.depth_scale_mm);

  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Rng rng(Rng::derive(config.seed, "ablation-ws", i));
    const Workspace ws = workspace_from_trajectory(experts[i], config.spta, rng);
    cell.train_envs.emplace_back(scenes[i], experts[i], ws, env_config);
  }

  const std::filesystem::path test_dir(config.test_manifest.directory);
  std::size_t index = 0;
  for (const ManifestEntry& entry : config.test_manifest.envs()) {
    auto scene = cache.get((test_dir / entry.scene_path).string());
    WaypointTrajectory expert =
        load_waypoints((test_dir / entry.trajectory_path).string(), config.pre);
    Rng rng(Rng::derive(config.seed, "ablation-test-ws", index++));
    const Workspace ws = workspace_from_trajectory(expert, config.spta, rng);
    cell.test_envs.emplace_back(scene, std::move(expert), ws,
                                apply_overrides(env_config, entry));
  }
  return cell;
}

AblationRow train_and_eval_cell(const AblationConfig& config, CellSetup& cell,
                                const std::string& name, bool prior,
                                std::ostream* progress) {
  const EnvConfig& env_config = cell.train_envs.front().config();
  const NetworkSpec policy_spec =
      NetworkSpec::policy(4, env_config.obs_height, env_config.obs_width);
  Network policy(policy_spec);
  Parameters params = policy.init_params(Rng::derive(config.seed, "policy-init"));

  TrainConfig train = config.train;
  train.seed = Rng::derive(config.seed, "train-" + name);
  if (prior) train_bc(policy, params, cell.demos, train, train.bc_epochs);

  Discriminator disc(NetworkSpec::reward(4, env_config.obs_height, env_config.obs_width),
                     train.discount, Rng::derive(config.seed, "disc-" + name));
  VectorEnv envs(std::move(cell.train_envs));
  const IllcResult result =
      train_illc(policy, std::move(params), disc, envs, cell.demos, train, progress);

  PolicyController controller(policy, result.policy, train.depth_scale_mm);
  EvalOptions options;
  options.episodes_per_scene = config.episodes_per_scene;
  options.seed = Rng::derive(config.seed, "ablation-eval");
  options.policy_id = name;
  const EvaluationReport report =
      evaluate_policy(controller, cell.test_envs, options);

  AblationRow row;
  row.name = name;
  row.sr = report.sr_mean;
  row.steps = report.steps_mean;
  row.a_eff = report.a_eff_mean;
  if (progress)
    *progress << "cell " << name << " sr=" << row.sr << " steps=" << row.steps << "\n";
  return row;
}

}  // namespace

AblationResult run_ablation(const AblationConfig& config, std::ostream* progress) {
  if (config.rates.empty()) throw std::invalid_argument("run_ablation: no rates");
  SceneCache cache;
  AblationResult result;

  const int base_rate = config.rates.back();
  for (int rate : config.rates) {
    CellSetup cell = build_cell(config, cache, rate, true);
    const std::string name =
        rate == 0 ? "no_spta" : "spta@" + std::to_string(rate) + "x";
    const AblationRow row = train_and_eval_cell(
        config, cell, rate == base_rate ? "base_spta@" + std::to_string(rate) + "x" : name,
        true, progress);
    result.rows.push_back(row);
    result.rate_curve.emplace_back(rate, row.sr);
  }
  {
    CellSetup cell = build_cell(config, cache, base_rate, true);
    result.rows.push_back(
        train_and_eval_cell(config, cell, "no_prior", false, progress));
  }
  {
    CellSetup cell = build_cell(config, cache, base_rate, false);
    result.rows.push_back(
        train_and_eval_cell(config, cell, "no_depth", true, progress));
  }
  return result;
}

void write_ablation_table(const std::string& path, const AblationResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ablation table: " + path);
  out << "cell\tsr_percent\tsteps\ta_eff_mm\n";
  char buf[160];
  for (const AblationRow& row : result.rows) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%s\n", row.name.c_str(), row.sr,
                  row.steps, format_aeff(row.a_eff).c_str());
    out << buf;
  }
}

void write_rate_curve(const std::string& path, const AblationResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write rate curve: " + path);
  char buf[64];
  for (const auto& [rate, sr] : result.rate_curve) {
    std::snprintf(buf, sizeof(buf), "%d\t%.4f\n", rate, sr);
    out << buf;
  }
}

}  // namespace scopesim
