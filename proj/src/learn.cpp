#include "scopesim/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace scopesim {

namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor gather_rows(const Tensor& src, std::span<const int> indices) {
  Tensor out({static_cast<int>(indices.size()), static_cast<int>(src.row_size())});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto row = src.row(indices[i]);
    std::copy(row.begin(), row.end(), out.row(static_cast<int>(i)).begin());
  }
  return out;
}

std::vector<int> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

// ---- observation featurization ------------------------------------------------

std::size_t obs_feature_count(int width, int height) {
  return 4 * static_cast<std::size_t>(width) * height;
}

void obs_to_row(const RGBDImage& obs, float depth_scale_mm, std::span<float> out) {
  const std::size_t hw = obs.pixel_count();
  if (out.size() != 4 * hw) throw std::invalid_argument("obs_to_row: size mismatch");
  const float inv_depth = 1.0f / depth_scale_mm;
  for (std::size_t pix = 0; pix < hw; ++pix) {
    out[pix] = obs.rgb[3 * pix];
    out[hw + pix] = obs.rgb[3 * pix + 1];
    out[2 * hw + pix] = obs.rgb[3 * pix + 2];
    out[3 * hw + pix] = obs.depth[pix] * inv_depth;
  }
}

// ---- expert demonstrations ------------------------------------------------------

DemoDataset build_demo_dataset(const std::vector<DemoSource>& sources,
                               const EnvConfig& config, float depth_scale_mm) {
  const CameraIntrinsics intrinsics = intrinsics_for(config);
  const ActionLimits limits = config.action_limits();
  const std::size_t features = obs_feature_count(config.obs_width, config.obs_height);

  DemoDataset data;
  std::vector<float> storage;
  int rows = 0;

  for (const DemoSource& source : sources) {
    if (!source.scene) throw std::invalid_argument("demo source without a scene");
    const WaypointTrajectory& traj = source.trajectory;
    const std::vector<Action> actions = waypoint_actions(traj, limits);

    std::vector<RenderRequest> requests;
    requests.reserve(traj.size());
    for (const EulerPose& wp : traj.waypoints)
      requests.push_back({source.scene, euler_to_pose(wp)});
    const std::vector<RGBDImage> images =
        render_batch(requests, intrinsics, config.splat_radius);

    const int base = rows;
    for (RGBDImage img : images) {
      if (!config.observe_depth) std::fill(img.depth.begin(), img.depth.end(), 0.0f);
      storage.resize(storage.size() + features);
      obs_to_row(img, depth_scale_mm,
                 std::span<float>(storage.data() + storage.size() - features, features));
      ++rows;
    }
    for (std::size_t j = 0; j < actions.size(); ++j) {
      DemoDataset::Tuple tuple;
      tuple.s = base + static_cast<int>(j);
      tuple.sp = base + static_cast<int>(j) + 1;
      const auto n = normalize_action(actions[j], limits);
      for (int c = 0; c < 6; ++c) tuple.action[c] = static_cast<float>(n[c]);
      data.tuples.push_back(tuple);
    }
  }

  data.obs.shape = {rows, static_cast<int>(features)};
  data.obs.data = std::move(storage);
  return data;
}

DemoDataset build_demo_dataset(const Manifest& manifest, const EnvConfig& config,
                               const PreprocessParams& pre, float depth_scale_mm) {
  const std::filesystem::path dir(manifest.directory);
  std::map<std::string, std::shared_ptr<const PointCloudScene>> cache;
  std::vector<DemoSource> sources;
  for (const ManifestEntry& entry : manifest.demos()) {
    const std::string scene_path = (dir / entry.scene_path).string();
    auto it = cache.find(scene_path);
    if (it == cache.end()) {
      auto scene = std::make_shared<PointCloudScene>(load_scene(scene_path));
      it = cache.emplace(scene_path, std::move(scene)).first;
    }
    DemoSource source;
    source.scene = it->second.get();
    source.trajectory = load_waypoints((dir / entry.trajectory_path).string(), pre);
    sources.push_back(std::move(source));
  }
  // keep scenes alive during rendering
  DemoDataset data = build_demo_dataset(sources, config, depth_scale_mm);
  return data;
}

// ---- rollout collection -----------------------------------------------------------

RolloutBuffer collect_rollouts(const Network& policy, const Parameters& params,
                               VectorEnv& envs, int capacity, std::uint64_t seed,
                               float depth_scale_mm) {
  const std::size_t E = envs.size();
  const EnvConfig& config0 = envs.env(0).config();
  const std::size_t features =
      obs_feature_count(config0.obs_width, config0.obs_height);
  const std::span<const float> log_std = params.view("log_std");
  const int action_dim = static_cast<int>(log_std.size());

  RolloutBuffer buffer;
  std::vector<float> obs_storage;
  int obs_rows = 0;
  auto push_obs = [&](const RGBDImage& obs) {
    obs_storage.resize(obs_storage.size() + features);
    obs_to_row(obs, depth_scale_mm,
               std::span<float>(obs_storage.data() + obs_storage.size() - features,
                                features));
    return obs_rows++;
  };

  std::vector<Rng> action_rng;
  std::vector<std::uint64_t> reset_counter(E, 0);
  auto reset_seed = [&](std::size_t e) {
    return Rng::derive(seed, "reset",
                       (static_cast<std::uint64_t>(e) << 32) | reset_counter[e]++);
  };
  for (std::size_t e = 0; e < E; ++e)
    action_rng.emplace_back(Rng::derive(seed, "sample", e));

  std::vector<std::uint64_t> first_seeds;
  for (std::size_t e = 0; e < E; ++e) first_seeds.push_back(reset_seed(e));
  const std::vector<RGBDImage> first_obs = envs.reset_all(first_seeds);
  std::vector<int> current(E);
  for (std::size_t e = 0; e < E; ++e) current[e] = push_obs(first_obs[e]);

  std::vector<float> action_storage, presquash_storage;
  int steps = 0;
  while (steps < capacity) {
    const std::size_t active = std::min(E, static_cast<std::size_t>(capacity - steps));

    Tensor batch({static_cast<int>(active), static_cast<int>(features)});
    for (std::size_t e = 0; e < active; ++e) {
      const float* src = obs_storage.data() +
                         static_cast<std::size_t>(current[e]) * features;
      std::copy(src, src + features, batch.row(static_cast<int>(e)).begin());
    }
    const auto outputs = policy.forward(params, batch);
    const Tensor& means = outputs[0];

    std::vector<std::array<double, 6>> env_actions(active);
    std::vector<std::array<float, 6>> sampled_a(active), sampled_u(active);
    std::vector<float> sampled_logp(active);
    for (std::size_t e = 0; e < active; ++e) {
      std::array<float, 6> a{}, u{};
      sample_squashed(means.row(static_cast<int>(e)), log_std, action_rng[e],
                      std::span<float>(u.data(), action_dim),
                      std::span<float>(a.data(), action_dim));
      sampled_a[e] = a;
      sampled_u[e] = u;
      sampled_logp[e] = static_cast<float>(squashed_log_prob(
          means.row(static_cast<int>(e)), log_std,
          std::span<const float>(u.data(), action_dim),
          std::span<const float>(a.data(), action_dim)));
      for (int c = 0; c < 6; ++c) env_actions[e][c] = sampled_a[e][c];
    }

    std::vector<StepResult> results;
    if (active == E) {
      results = envs.step_all(
          std::vector<std::array<double, 6>>(env_actions.begin(), env_actions.end()));
    } else {
      for (std::size_t e = 0; e < active; ++e)
        results.push_back(envs.env(e).step(env_actions[e]));
    }

    for (std::size_t e = 0; e < active; ++e) {
      const int sp = push_obs(results[e].obs);
      buffer.s_idx.push_back(current[e]);
      buffer.sp_idx.push_back(sp);
      buffer.logp.push_back(sampled_logp[e]);
      buffer.env_index.push_back(static_cast<int>(e));
      buffer.terminal.push_back(results[e].success ? 1 : 0);
      buffer.episode_end.push_back(results[e].done ? 1 : 0);
      for (int c = 0; c < 6; ++c) {
        action_storage.push_back(sampled_a[e][c]);
        presquash_storage.push_back(sampled_u[e][c]);
      }
      if (results[e].done) {
        buffer.episodes += 1;
        if (results[e].success) buffer.successes += 1;
        const RGBDImage fresh = envs.env(e).reset(reset_seed(e));
        current[e] = push_obs(fresh);
      } else {
        current[e] = sp;
      }
      ++steps;
    }
  }

  buffer.obs.shape = {obs_rows, static_cast<int>(features)};
  buffer.obs.data = std::move(obs_storage);
  const int n = static_cast<int>(buffer.s_idx.size());
  buffer.actions.shape = {n, 6};
  buffer.actions.data = std::move(action_storage);
  buffer.presquash.shape = {n, 6};
  buffer.presquash.data = std::move(presquash_storage);
  buffer.value.assign(n, 0.0f);
  buffer.reward.assign(n, 0.0f);
  buffer.advantage.assign(n, 0.0f);
  buffer.ret.assign(n, 0.0f);
  return buffer;
}

std::vector<float> value_all_obs(const Network& policy, const Parameters& params,
                                 const RolloutBuffer& buffer) {
  const int total = buffer.obs.batch();
  std::vector<float> values(total, 0.0f);
  const int chunk = 256;
  for (int start = 0; start < total; start += chunk) {
    const int count = std::min(chunk, total - start);
    Tensor batch({count, static_cast<int>(buffer.obs.row_size())});
    std::copy(buffer.obs.data.begin() +
                  static_cast<std::ptrdiff_t>(start) * buffer.obs.row_size(),
              buffer.obs.data.begin() +
                  static_cast<std::ptrdiff_t>(start + count) * buffer.obs.row_size(),
              batch.data.begin());
    const auto outputs = policy.forward(params, batch);
    const Tensor& value_head = outputs[1];
    for (int i = 0; i < count; ++i) values[start + i] = value_head.data[i];
  }
  return values;
}

void compute_gae(RolloutBuffer& buffer, const std::vector<float>& values,
                 const TrainConfig& config) {
  const std::size_t n = buffer.size();
  if (values.size() != static_cast<std::size_t>(buffer.obs.batch()))
    throw std::invalid_argument("compute_gae: value count mismatch");

  std::map<int, std::vector<std::size_t>> per_env;
  for (std::size_t t = 0; t < n; ++t) per_env[buffer.env_index[t]].push_back(t);

  for (auto& [env, steps] : per_env) {
    double acc = 0.0;
    for (std::size_t i = steps.size(); i-- > 0;) {
      const std::size_t t = steps[i];
      const double v_s = values[static_cast<std::size_t>(buffer.s_idx[t])];
      const double v_sp = values[static_cast<std::size_t>(buffer.sp_idx[t])];
      const double bootstrap = buffer.terminal[t] ? 0.0 : v_sp;
      const double delta = buffer.reward[t] + config.discount * bootstrap - v_s;
      acc = delta + (buffer.episode_end[t]
                         ? 0.0
                         : config.discount * config.gae_lambda * acc);
      buffer.advantage[t] = static_cast<float>(acc);
      buffer.ret[t] = static_cast<float>(acc + v_s);
      buffer.value[t] = static_cast<float>(v_s);
    }
  }
}

// ---- behavior cloning ---------------------------------------------------------

BcResult train_bc(const Network& policy, Parameters& params, const DemoDataset& data,
                  const TrainConfig& config, int epochs) {
  if (data.size() == 0) throw std::invalid_argument("train_bc: empty dataset");
  AdamState state(params.size());
  AdamConfig adam;
  adam.lr = config.bc_lr;
  const ParamSlice& log_std_slice = params.slice("log_std");
  const int action_dim = static_cast<int>(log_std_slice.size);

  BcResult result;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(Rng::derive(config.seed, "bc-epoch", static_cast<std::uint64_t>(epoch)));
    const std::vector<int> order = shuffled_indices(data.size(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(config.batch_size, order.size() - start);
      std::vector<int> srows(count);
      for (std::size_t i = 0; i < count; ++i)
        srows[i] = data.tuples[order[start + i]].s;
      const Tensor batch = gather_rows(data.obs, srows);

      Network::Cache cache;
      const auto outputs = policy.forward(params, batch, nullptr, &cache);
      const Tensor& means = outputs[0];
      const std::span<const float> log_std =
          std::span<const float>(params.values.data() + log_std_slice.offset,
                                 log_std_slice.size);

      std::vector<float> grad(params.size(), 0.0f);
      std::vector<Tensor> head_grads;
      head_grads.emplace_back(std::vector<int>{static_cast<int>(count), action_dim});
      head_grads.emplace_back(std::vector<int>{static_cast<int>(count), 1});

      double loss = 0.0;
      std::vector<float> presquash(action_dim), d_mean(action_dim), d_ls(action_dim);
      for (std::size_t i = 0; i < count; ++i) {
        const auto& tuple = data.tuples[order[start + i]];
        const std::span<const float> action(tuple.action.data(), action_dim);
        presquash_of_action(action, presquash);
        const auto mean_row = means.row(static_cast<int>(i));
        loss -= squashed_log_prob(mean_row, log_std, presquash, action);
        squashed_log_prob_grad(mean_row, log_std, presquash, d_mean, d_ls);
        // d(-lp)/dtheta, averaged over the minibatch
        for (int c = 0; c < action_dim; ++c) {
          head_grads[0].data[i * action_dim + c] =
              -d_mean[c] / static_cast<float>(count);
          grad[log_std_slice.offset + c] += -d_ls[c] / static_cast<float>(count);
        }
      }
      loss /= static_cast<double>(count);
      policy.backward(params, cache, head_grads, grad);
      adam_step(params.values, grad, state, adam);
      epoch_loss += loss * static_cast<double>(count);
      epoch_count += count;
    }
    result.loss_per_epoch.push_back(static_cast<float>(epoch_loss / epoch_count));
  }
  return result;
}

// ---- discriminator ---------------------------------------------------------------

Discriminator::Discriminator(NetworkSpec s, float gamma, std::uint64_t seed)
    : spec(s), rb(s), h(s), gamma_d(gamma) {
  rb_params = rb.init_params(Rng::derive(seed, "disc-rb"));
  h_params = h.init_params(Rng::derive(seed, "disc-h"));
}

GailDiscriminator::GailDiscriminator(NetworkSpec s, std::uint64_t seed)
    : spec(s), net(s) {
  params = net.init_params(Rng::derive(seed, "disc-gail"));
}

std::vector<float> disc_r_theta(const Discriminator& disc, const Tensor& obs_s,
                                const Tensor& obs_sp) {
  const auto rb_out = disc.rb.forward(disc.rb_params, obs_s);
  const auto h_s = disc.h.forward(disc.h_params, obs_s);
  const auto h_sp = disc.h.forward(disc.h_params, obs_sp);
  std::vector<float> r(static_cast<std::size_t>(obs_s.batch()));
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = rb_out[0].data[i] + disc.gamma_d * h_sp[0].data[i] - h_s[0].data[i];
  return r;
}

double agent_reward(float r_theta, float log_pi) {
  return static_cast<double>(r_theta) - static_cast<double>(log_pi);
}

namespace {

struct LogitGrads {
  std::vector<float> dlogit;  // dLoss/dlogit per sample
  double loss = 0.0;
  double correct = 0.0;
  int kept = 0;
  int dropped = 0;
};

// expert label 1, agent label 0
LogitGrads logit_bce(const std::vector<float>& logits, const std::vector<float>& logp,
                     bool expert) {
  LogitGrads out;
  out.dlogit.assign(logits.size(), 0.0f);
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (std::isfinite(logp[i])) ++out.kept;
  out.dropped = static_cast<int>(logits.size()) - out.kept;
  if (out.kept == 0) return out;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logp[i])) continue;
    const double logit = static_cast<double>(logits[i]) - logp[i];
    const double d = sigmoid(logit);
    if (expert) {
      out.loss += softplus(-logit) / out.kept;
      out.dlogit[i] = static_cast<float>((d - 1.0) / out.kept);
      out.correct += logit > 0 ? 1.0 : 0.0;
    } else {
      out.loss += softplus(logit) / out.kept;
      out.dlogit[i] = static_cast<float>(d / out.kept);
      out.correct += logit <= 0 ? 1.0 : 0.0;
    }
  }
  out.correct /= out.kept;
  return out;
}

void backprop_airl(const Discriminator& disc, const Tensor& obs_s, const Tensor& obs_sp,
                   const std::vector<float>& dlogit, std::vector<float>& grad_rb,
                   std::vector<float>& grad_h) {
  const int n = obs_s.batch();
  Network::Cache cache_rb, cache_hs, cache_hsp;
  disc.rb.forward(disc.rb_params, obs_s, nullptr, &cache_rb);
  disc.h.forward(disc.h_params, obs_s, nullptr, &cache_hs);
  disc.h.forward(disc.h_params, obs_sp, nullptr, &cache_hsp);

  Tensor g_rb({n, 1}), g_hs({n, 1}), g_hsp({n, 1});
  for (int i = 0; i < n; ++i) {
    g_rb.data[i] = dlogit[i];
    g_hs.data[i] = -dlogit[i];
    g_hsp.data[i] = disc.gamma_d * dlogit[i];
  }
  disc.rb.backward(disc.rb_params, cache_rb, {g_rb}, grad_rb);
  disc.h.backward(disc.h_params, cache_hs, {g_hs}, grad_h);
  disc.h.backward(disc.h_params, cache_hsp, {g_hsp}, grad_h);
}

}  // namespace

DiscLossResult discriminator_loss(const Discriminator& disc, const DiscBatch& expert,
                                  const DiscBatch& agent) {
  if (expert.obs_s.batch() == 0 || agent.obs_s.batch() == 0)
    throw std::invalid_argument("discriminator_loss: empty batch");

  const std::vector<float> r_expert = disc_r_theta(disc, expert.obs_s, expert.obs_sp);
  const std::vector<float> r_agent = disc_r_theta(disc, agent.obs_s, agent.obs_sp);

  const LogitGrads ge = logit_bce(r_expert, expert.logp, true);
  const LogitGrads ga = logit_bce(r_agent, agent.logp, false);

  DiscLossResult result;
  result.loss = ge.loss + ga.loss;
  result.accuracy = 0.5 * (ge.correct + ga.correct);
  result.dropped = ge.dropped + ga.dropped;
  result.grad_rb.assign(disc.rb_params.size(), 0.0f);
  result.grad_h.assign(disc.h_params.size(), 0.0f);
  backprop_airl(disc, expert.obs_s, expert.obs_sp, ge.dlogit, result.grad_rb,
                result.grad_h);
  backprop_airl(disc, agent.obs_s, agent.obs_sp, ga.dlogit, result.grad_rb,
                result.grad_h);
  return result;
}

// ---- PPO ---------------------------------------------------------------------

PpoStats ppo_update(const Network& policy, Parameters& params, AdamState& state,
                    const RolloutBuffer& buffer, const TrainConfig& config, Rng& rng) {
  const std::size_t n = buffer.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty buffer");
  const ParamSlice& log_std_slice = params.slice("log_std");
  const int action_dim = static_cast<int>(log_std_slice.size);

  // advantages normalized over the whole rollout batch
  double mean = 0.0;
  for (float a : buffer.advantage) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float a : buffer.advantage) var += (a - mean) * (a - mean);
  // the floor keeps near-converged batches (advantages ~ noise) from being
  // re-amplified to unit scale
  const double stddev = std::max(std::sqrt(var / static_cast<double>(n)), 1e-2);
  std::vector<float> adv(n);
  for (std::size_t t = 0; t < n; ++t)
    adv[t] = static_cast<float>((buffer.advantage[t] - mean) / stddev);

  AdamConfig adam;
  adam.lr = config.ppo_lr;

  PpoStats stats;
  int minibatches = 0;
  for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(n, rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(config.batch_size, order.size() - start);

      std::vector<int> srows(count);
      for (std::size_t i = 0; i < count; ++i)
        srows[i] = buffer.s_idx[order[start + i]];
      const Tensor batch = gather_rows(buffer.obs, srows);

      Network::Cache cache;
      const auto outputs = policy.forward(params, batch, nullptr, &cache);
      const Tensor& means = outputs[0];
      const Tensor& values = outputs[1];
      const std::span<const float> log_std(
          params.values.data() + log_std_slice.offset, log_std_slice.size);

      std::vector<float> grad(params.size(), 0.0f);
      std::vector<Tensor> head_grads;
      head_grads.emplace_back(std::vector<int>{static_cast<int>(count), action_dim});
      head_grads.emplace_back(std::vector<int>{static_cast<int>(count), 1});

      double pi_loss = 0.0, v_loss = 0.0;
      std::vector<float> d_mean(action_dim), d_ls(action_dim);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t t = static_cast<std::size_t>(order[start + i]);
        const auto mean_row = means.row(static_cast<int>(i));
        const std::span<const float> u(
            buffer.presquash.data.data() + t * static_cast<std::size_t>(action_dim),
            action_dim);
        const std::span<const float> a(
            buffer.actions.data.data() + t * static_cast<std::size_t>(action_dim),
            action_dim);
        const double lp_new = squashed_log_prob(mean_row, log_std, u, a);
        const double ratio = std::exp(lp_new - buffer.logp[t]);
        const double advantage = adv[t];
        const double surr1 = ratio * advantage;
        const double clipped =
            std::clamp(ratio, 1.0 - config.ppo_clip, 1.0 + config.ppo_clip);
        const double surr2 = clipped * advantage;
        pi_loss -= std::min(surr1, surr2);

        // gradient flows only through the unclipped branch
        const bool active = surr1 <= surr2;
        const double dloss_dlp =
            active ? -advantage * ratio / static_cast<double>(count) : 0.0;
        squashed_log_prob_grad(mean_row, log_std, u, d_mean, d_ls);
        for (int c = 0; c < action_dim; ++c) {
          head_grads[0].data[i * static_cast<std::size_t>(action_dim) + c] =
              static_cast<float>(dloss_dlp * d_mean[c]);
          grad[log_std_slice.offset + c] += static_cast<float>(
              dloss_dlp * d_ls[c] -
              config.entropy_weight / static_cast<double>(count));
        }

        const double v = values.data[i];
        const double v_err = v - buffer.ret[t];
        v_loss += config.value_weight * v_err * v_err;
        head_grads[1].data[i] = static_cast<float>(
            2.0 * config.value_weight * v_err / static_cast<double>(count));
      }
      pi_loss /= static_cast<double>(count);
      v_loss /= static_cast<double>(count);

      policy.backward(params, cache, head_grads, grad);
      adam_step(params.values, grad, state, adam);

      stats.policy_loss += static_cast<float>(pi_loss);
      stats.value_loss += static_cast<float>(v_loss);
      ++minibatches;
    }
  }
  if (minibatches) {
    stats.policy_loss /= static_cast<float>(minibatches);
    stats.value_loss /= static_cast<float>(minibatches);
  }
  stats.entropy = static_cast<float>(
      gaussian_entropy(params.view("log_std")));
  return stats;
}

// ---- adversarial loops ------------------------------------------------------------

namespace {

DiscBatch make_expert_batch(const DemoDataset& demos, std::span<const int> picks,
                            const Network& policy, const Parameters& pparams) {
  DiscBatch batch;
  std::vector<int> srows(picks.size()), sprows(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    srows[i] = demos.tuples[picks[i]].s;
    sprows[i] = demos.tuples[picks[i]].sp;
  }
  batch.obs_s = gather_rows(demos.obs, srows);
  batch.obs_sp = gather_rows(demos.obs, sprows);
  batch.actions = Tensor({static_cast<int>(picks.size()), 6});
  for (std::size_t i = 0; i < picks.size(); ++i)
    for (int c = 0; c < 6; ++c)
      batch.actions.data[i * 6 + c] = demos.tuples[picks[i]].action[c];

  const auto outputs = policy.forward(pparams, batch.obs_s);
  const std::span<const float> log_std = pparams.view("log_std");
  batch.logp.resize(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i)
    batch.logp[i] = static_cast<float>(squashed_log_prob_from_action(
        outputs[0].row(static_cast<int>(i)), log_std,
        std::span<const float>(batch.actions.data.data() + i * 6, 6)));
  return batch;
}

DiscBatch make_agent_batch(const RolloutBuffer& buffer, std::span<const int> picks) {
  DiscBatch batch;
  std::vector<int> srows(picks.size()), sprows(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    srows[i] = buffer.s_idx[picks[i]];
    sprows[i] = buffer.sp_idx[picks[i]];
  }
  batch.obs_s = gather_rows(buffer.obs, srows);
  batch.obs_sp = gather_rows(buffer.obs, sprows);
  batch.actions = Tensor({static_cast<int>(picks.size()), 6});
  batch.logp.resize(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    for (int c = 0; c < 6; ++c)
      batch.actions.data[i * 6 + c] =
          buffer.actions.data[static_cast<std::size_t>(picks[i]) * 6 + c];
    batch.logp[i] = buffer.logp[picks[i]];
  }
  return batch;
}

}  // namespace

GailLossResult gail_discriminator_loss(const GailDiscriminator& disc,
                                       const DiscBatch& expert, const DiscBatch& agent) {
  GailLossResult result;
  result.grad.assign(disc.params.size(), 0.0f);

  auto run = [&](const DiscBatch& batch, bool is_expert) {
    Network::Cache cache;
    const auto out = disc.net.forward(disc.params, batch.obs_s, &batch.actions, &cache);
    const int n = batch.obs_s.batch();
    Tensor g({n, 1});
    double correct = 0.0;
    for (int i = 0; i < n; ++i) {
      const double logit = out[0].data[i];
      const double d = sigmoid(logit);
      if (is_expert) {
        result.loss += softplus(-logit) / n;
        g.data[i] = static_cast<float>((d - 1.0) / n);
        correct += logit > 0 ? 1.0 : 0.0;
      } else {
        result.loss += softplus(logit) / n;
        g.data[i] = static_cast<float>(d / n);
        correct += logit <= 0 ? 1.0 : 0.0;
      }
    }
    disc.net.backward(disc.params, cache, {g}, result.grad);
    return correct / n;
  };
  const double acc_e = run(expert, true);
  const double acc_a = run(agent, false);
  result.accuracy = 0.5 * (acc_e + acc_a);
  return result;
}

namespace {

enum class RewardForm { Airl, Gail };

void relabel_rewards(RolloutBuffer& buffer, RewardForm form, const Discriminator* airl,
                     const GailDiscriminator* gail, float reward_clip) {
  const std::size_t n = buffer.size();
  const int chunk = 256;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min<std::size_t>(chunk, n - start);
    std::vector<int> srows(count), sprows(count);
    for (std::size_t i = 0; i < count; ++i) {
      srows[i] = buffer.s_idx[start + i];
      sprows[i] = buffer.sp_idx[start + i];
    }
    const Tensor obs_s = gather_rows(buffer.obs, srows);
    if (form == RewardForm::Airl) {
      const Tensor obs_sp = gather_rows(buffer.obs, sprows);
      const std::vector<float> r = disc_r_theta(*airl, obs_s, obs_sp);
      for (std::size_t i = 0; i < count; ++i)
        buffer.reward[start + i] = std::clamp(
            static_cast<float>(agent_reward(r[i], buffer.logp[start + i])),
            -reward_clip, reward_clip);
    } else {
      Tensor actions({static_cast<int>(count), 6});
      for (std::size_t i = 0; i < count; ++i)
        for (int c = 0; c < 6; ++c)
          actions.data[i * 6 + c] =
              buffer.actions.data[(start + i) * 6 + c];
      const auto out = gail->net.forward(gail->params, obs_s, &actions);
      for (std::size_t i = 0; i < count; ++i)
        buffer.reward[start + i] = std::min(
            static_cast<float>(softplus(out[0].data[i])), reward_clip);
    }
  }
}

IllcResult train_adversarial(const Network& policy, Parameters policy_params,
                             RewardForm form, Discriminator* airl,
                             GailDiscriminator* gail, VectorEnv& envs,
                             const DemoDataset& demos, const TrainConfig& config,
                             std::ostream* log_stream, const IterationHook& hook) {
  if (demos.size() == 0)
    throw std::invalid_argument("adversarial training: empty expert dataset");

  AdamState policy_state(policy_params.size());
  AdamConfig disc_adam;
  disc_adam.lr = config.disc_lr;
  AdamState rb_state(airl ? airl->rb_params.size() : 0);
  AdamState h_state(airl ? airl->h_params.size() : 0);
  AdamState gail_state(gail ? gail->params.size() : 0);

  IllcResult result;
  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    RolloutBuffer buffer = collect_rollouts(
        policy, policy_params, envs, config.rollout_capacity,
        Rng::derive(config.seed, "collect", static_cast<std::uint64_t>(iteration)),
        config.depth_scale_mm);

    // discriminator updates on mixed expert/agent minibatches
    Rng disc_rng(Rng::derive(config.seed, "disc", static_cast<std::uint64_t>(iteration)));
    const int disc_steps =
        config.disc_steps_per_iter > 0
            ? config.disc_steps_per_iter
            : std::max<int>(1, config.disc_epochs * static_cast<int>(buffer.size()) /
                                   config.batch_size);
    double disc_loss = 0.0, disc_acc = 0.0;
    int dropped = 0;
    for (int step = 0; step < disc_steps; ++step) {
      std::vector<int> expert_picks(config.batch_size), agent_picks(config.batch_size);
      for (int& p : expert_picks)
        p = static_cast<int>(disc_rng.uniform_int(demos.size()));
      for (int& p : agent_picks)
        p = static_cast<int>(disc_rng.uniform_int(buffer.size()));
      const DiscBatch expert =
          make_expert_batch(demos, expert_picks, policy, policy_params);
      const DiscBatch agent = make_agent_batch(buffer, agent_picks);

      if (form == RewardForm::Airl) {
        const DiscLossResult loss = discriminator_loss(*airl, expert, agent);
        if (loss.accuracy <= config.disc_accuracy_cap) {
          adam_step(airl->rb_params.values, loss.grad_rb, rb_state, disc_adam);
          adam_step(airl->h_params.values, loss.grad_h, h_state, disc_adam);
        }
        disc_loss += loss.loss;
        disc_acc += loss.accuracy;
        dropped += loss.dropped;
      } else {
        const GailLossResult loss = gail_discriminator_loss(*gail, expert, agent);
        if (loss.accuracy <= config.disc_accuracy_cap)
          adam_step(gail->params.values, loss.grad, gail_state, disc_adam);
        disc_loss += loss.loss;
        disc_acc += loss.accuracy;
      }
    }
    disc_loss /= disc_steps;
    disc_acc /= disc_steps;

    // every buffer reward reflects the just-updated discriminator
    relabel_rewards(buffer, form, airl, gail, config.reward_clip);

    const std::vector<float> values = value_all_obs(policy, policy_params, buffer);
    compute_gae(buffer, values, config);

    Rng ppo_rng(Rng::derive(config.seed, "ppo", static_cast<std::uint64_t>(iteration)));
    const PpoStats ppo =
        ppo_update(policy, policy_params, policy_state, buffer, config, ppo_rng);

    IterRecord record;
    record.iteration = iteration;
    record.disc_loss = static_cast<float>(disc_loss);
    record.disc_accuracy = static_cast<float>(disc_acc);
    record.policy_loss = ppo.policy_loss;
    record.value_loss = ppo.value_loss;
    record.train_sr = buffer.exploration_sr();
    record.dropped = dropped;
    record.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log_stream) write_log_record(*log_stream, record);
    if (hook) hook(record, policy_params);
    result.log.push_back(record);
    if (iteration + 1 == config.iterations) result.last_buffer = std::move(buffer);
  }

  result.policy = std::move(policy_params);
  return result;
}

}  // namespace

IllcResult train_illc(const Network& policy, Parameters policy_init,
                      Discriminator& disc, VectorEnv& envs, const DemoDataset& demos,
                      const TrainConfig& config, std::ostream* log_stream,
                      const IterationHook& hook) {
  return train_adversarial(policy, std::move(policy_init), RewardForm::Airl, &disc,
                           nullptr, envs, demos, config, log_stream, hook);
}

IllcResult train_gail(const Network& policy, Parameters policy_init,
                      GailDiscriminator& disc, VectorEnv& envs,
                      const DemoDataset& demos, const TrainConfig& config,
                      std::ostream* log_stream, const IterationHook& hook) {
  return train_adversarial(policy, std::move(policy_init), RewardForm::Gail, nullptr,
                           &disc, envs, demos, config, log_stream, hook);
}

void write_log_record(std::ostream& out, const IterRecord& r) {
  out << "iter=" << r.iteration << " disc_loss=" << r.disc_loss
      << " disc_acc=" << r.disc_accuracy << " policy_loss=" << r.policy_loss
      << " value_loss=" << r.value_loss << " train_sr=" << r.train_sr
      << " dropped=" << r.dropped << " wall_s=" << r.wall_s << "\n";
  out.flush();
}

}  // namespace scopesim
