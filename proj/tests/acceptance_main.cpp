// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 7/8 train on the committed micro-suite configuration in
// configs/acceptance_micro.cfg and respect their stated wall-clock budgets.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "scopesim/config.hpp"
#include "scopesim/eval.hpp"
#include "scopesim/reference.hpp"
#include "scopesim/scenegen.hpp"
#include "scopesim/suite.hpp"

namespace fs = std::filesystem;
using namespace scopesim;

namespace {

#ifndef SCOPESIM_SOURCE_DIR
#error "SCOPESIM_SOURCE_DIR must point at the repository root"
#endif

struct Criterion {
  int id;
  std::string name;
  std::function<void(std::vector<std::string>&)> body;
};

#define ACC_CHECK(cond, ...)                                      \
  do {                                                            \
    if (!(cond)) {                                                \
      char buf_[512];                                             \
      std::snprintf(buf_, sizeof(buf_), __VA_ARGS__);             \
      failures.push_back(std::string(#cond) + " | " + buf_);      \
    }                                                             \
  } while (0)

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

EulerPose random_euler(Rng& rng) {
  EulerPose e;
  e.x = rng.uniform(-50, 50);
  e.y = rng.uniform(-50, 50);
  e.z = rng.uniform(-50, 50);
  e.alpha = rng.uniform(-kPi, kPi);
  e.beta = rng.uniform(-kPi / 2 + 0.05, kPi / 2 - 0.05);
  e.gamma = rng.uniform(-kPi, kPi);
  return e;
}

// ---- C1: geometry / trajectory exactness -------------------------------------

void criterion1(std::vector<std::string>& failures) {
  Rng rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const EulerPose e = random_euler(rng);
    const EulerPose back = pose_to_euler(euler_to_pose(e));
    for (int c = 0; c < 6; ++c)
      ACC_CHECK(std::abs(back.channel(c) - e.channel(c)) < 1e-9,
                "euler round-trip channel %d trial %d", c, trial);

    const Pose a = euler_to_pose(e);
    const Pose ident = compose(a, inverse(a));
    ACC_CHECK(norm(ident.translation) < 1e-9, "inverse translation trial %d", trial);
    ACC_CHECK(rotation_geodesic(ident.rotation, Mat3::identity()) < 1e-6,
              "inverse rotation trial %d", trial);

    const Pose b = euler_to_pose(random_euler(rng));
    const Action action = relative_action(a, b);
    const Pose rebuilt = compose(a, action_to_pose(action));
    ACC_CHECK(norm(rebuilt.translation - b.translation) < 1e-9,
              "action replay translation trial %d", trial);
    ACC_CHECK(rotation_geodesic(rebuilt.rotation, b.rotation) < 1e-6,
              "action replay rotation trial %d", trial);
  }

  // equal-distance resampling invariants on random smooth trajectories
  for (int trial = 0; trial < 1000; ++trial) {
    Rng t_rng(200 + trial);
    RawTrajectory raw;
    Vec3 pos{t_rng.uniform(-5, 5), t_rng.uniform(-5, 5), t_rng.uniform(20, 30)};
    Vec3 dir = normalized(
        Vec3{t_rng.uniform(-1, 1), t_rng.uniform(-1, 1), t_rng.uniform(-1, 1)});
    const int m = 40;
    for (int i = 0; i < m; ++i) {
      EulerPose p;
      p.x = pos.x;
      p.y = pos.y;
      p.z = pos.z;
      p.alpha = 0.01 * i;
      raw.points.push_back(p);
      const Vec3 wobble{t_rng.uniform(-0.2, 0.2), t_rng.uniform(-0.2, 0.2),
                        t_rng.uniform(-0.2, 0.2)};
      pos += (dir + wobble) * 0.35;
    }
    const WaypointTrajectory wp = resample_equal_distance(raw, 1.0);
    ACC_CHECK(wp.waypoints[0].x == raw.points[0].x, "W0 == P0 trial %d", trial);
    for (std::size_t j = 0; j + 2 < wp.size(); ++j) {
      const double d =
          norm(wp.waypoints[j + 1].position() - wp.waypoints[j].position());
      ACC_CHECK(std::abs(d - 1.0) < 1e-6, "separation %zu trial %d", j, trial);
    }
    ACC_CHECK(norm(wp.back().position() - raw.points.back().position()) < 1e-12,
              "appended endpoint trial %d", trial);

    // resampling an equally spaced trajectory reproduces it
    RawTrajectory spaced;
    spaced.points.assign(wp.waypoints.begin(), wp.waypoints.end() - 1);
    if (spaced.points.size() >= 2) {
      const WaypointTrajectory again = resample_equal_distance(spaced, 1.0);
      const std::size_t n = std::min(again.size() - 1, spaced.points.size());
      for (std::size_t j = 0; j < n; ++j)
        ACC_CHECK(norm(again.waypoints[j].position() - spaced.points[j].position()) <
                      1e-6,
                  "idempotence %zu trial %d", j, trial);
    }

    // open-loop replay closure
    const auto actions = waypoint_actions(wp, ActionLimits{10.0, 1.0});
    Pose pose = euler_to_pose(wp.front());
    for (const Action& a : actions) pose = compose(pose, action_to_pose(a));
    const Pose goal = euler_to_pose(wp.back());
    ACC_CHECK(norm(pose.translation - goal.translation) < 1e-6,
              "replay closure position trial %d", trial);
    ACC_CHECK(rotation_geodesic(pose.rotation, goal.rotation) < 1e-6,
              "replay closure rotation trial %d", trial);
  }
}

// ---- C2: SPTA guarantees -------------------------------------------------------

void criterion2(std::vector<std::string>& failures) {
  Rng seeds(202);
  int executed = 0;
  for (int trial = 0; trial < 700 && executed < 500; ++trial) {
    Rng t_rng(seeds.next_u64());
    RawTrajectory raw;
    Vec3 pos{t_rng.uniform(-5, 5), t_rng.uniform(-5, 5), t_rng.uniform(20, 30)};
    const Vec3 dir = normalized(
        Vec3{t_rng.uniform(-1, 1), t_rng.uniform(-1, 1), t_rng.uniform(-1, 1)});
    const double length = t_rng.uniform(8.0, 14.0);
    const int m = 50;
    for (int i = 0; i < m; ++i) {
      const double t = static_cast<double>(i) / (m - 1);
      EulerPose p;
      const Vec3 at = pos + dir * (length * t);
      p.x = at.x;
      p.y = at.y;
      p.z = at.z;
      p.alpha = 0.1 * t;
      p.beta = -0.08 * t;
      p.gamma = 0.12 * t;
      raw.points.push_back(p);
    }
    const WaypointTrajectory wp = resample_equal_distance(raw, 1.0);

    AugmentationParams params;
    const Workspace ws = workspace_from_trajectory(wp, params, t_rng);
    const EulerPose start = sample_start(ws, wp.front(), t_rng);
    AugmentationInfo info;
    const WaypointTrajectory aug = augment(wp, start, params, t_rng, &info);
    if (info.dist < 1e-9) continue;
    ++executed;

    const double gap0 = norm(aug.waypoints[0].position() - start.position());
    ACC_CHECK(std::abs(gap0 - info.epsilon * info.dist) < 1e-6,
              "W'0 gap %g vs eps*dist %g", gap0, info.epsilon * info.dist);

    const double gap_end = norm(aug.back().position() - wp.back().position());
    ACC_CHECK(gap_end <= info.epsilon * info.dist + 1e-9, "endpoint dev %g", gap_end);

    const std::size_t L = aug.size() - 1;
    const DecayCoefficients c =
        solve_decay(info.dist, info.epsilon, info.gamma, L);
    ACC_CHECK(std::abs(c.k1 + c.k2 - info.dist) < 1e-12 * std::max(1.0, info.dist),
              "boundary identity e0");
    ACC_CHECK(std::abs(c.k1 * std::exp(info.gamma * static_cast<double>(L)) + c.k2 -
                       info.epsilon * info.dist) <
                  1e-12 * std::max(1.0, info.dist),
              "boundary identity eL");

    double previous = 1e100;
    for (std::size_t j = 0; j <= L; ++j) {
      const double offset =
          norm(aug.waypoints[j].position() - wp.waypoints[info.j_star + j].position());
      ACC_CHECK(offset < previous + 1e-12, "offset decay at %zu", j);
      previous = offset;
    }
  }
  ACC_CHECK(executed == 500, "only %d augmentations executed", executed);
}

// ---- C3: renderer correctness ----------------------------------------------------

void criterion3(std::vector<std::string>& failures) {
  CameraIntrinsics intr;
  intr.width = 160;
  intr.height = 128;
  intr.fx = intr.fy = 175.0;
  intr.cx = 80.0;
  intr.cy = 64.0;

  {  // pinhole and z-buffer unit cases
    PointCloudScene scene;
    scene.add_point({0, 0, 100}, 0.9f, 0.1f, 0.2f);
    const RGBDImage img = render(scene, Pose::identity(), intr, 0);
    const std::size_t pix = static_cast<std::size_t>(64) * 160 + 80;
    ACC_CHECK(img.depth[pix] == 100.0f, "center depth %g", img.depth[pix]);
    std::size_t hits = 0;
    for (float d : img.depth) hits += d > 0 ? 1 : 0;
    ACC_CHECK(hits == 1, "hit count %zu", hits);

    PointCloudScene two;
    two.add_point({0, 0, 80}, 0.1f, 0.1f, 0.1f);
    two.add_point({0, 0, 50}, 0.9f, 0.9f, 0.9f);
    const RGBDImage z = render(two, Pose::identity(), intr, 0);
    ACC_CHECK(z.depth[pix] == 50.0f, "z-buffer depth %g", z.depth[pix]);
    ACC_CHECK(z.rgb[3 * pix] == 0.9f, "z-buffer color %g", z.rgb[3 * pix]);

    PointCloudScene behind;
    behind.add_point({0, 0, -5}, 1, 1, 1);
    const RGBDImage culled = render(behind, Pose::identity(), intr, 2);
    for (float d : culled.depth) ACC_CHECK(d == 0.0f, "behind-camera culling");
  }

  {  // backprojection on a 1e5-point generated scene
    SceneSpec spec;
    const GeneratedScene generated = generate_scene(spec, 303);
    const int radius = 1;
    const RGBDImage img = render(generated.cloud, Pose::identity(), intr, radius);
    Rng rng(304);
    int checked = 0;
    for (int trial = 0; trial < 600 && checked < 200; ++trial) {
      const int u = static_cast<int>(rng.uniform_int(intr.width));
      const int v = static_cast<int>(rng.uniform_int(intr.height));
      const std::size_t pix = static_cast<std::size_t>(v) * intr.width + u;
      const double z = img.depth[pix];
      if (z <= 0) continue;
      ++checked;
      const Vec3 world{(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z};
      double best = 1e100;
      for (std::size_t i = 0; i < generated.cloud.size(); ++i)
        best = std::min(best, norm(world - generated.cloud.position(i)));
      const double tol = (radius + 1.0) * z / intr.fx + 1e-6;
      ACC_CHECK(best <= tol, "backprojection residual %g > %g", best, tol);
    }
    ACC_CHECK(checked == 200, "only %d pixels checked", checked);

    // batch-parallel output bitwise equal to sequential
    std::vector<RenderRequest> requests;
    for (int i = 0; i < 8; ++i) {
      EulerPose e;
      e.x = 0.5 * i;
      e.alpha = 0.01 * i;
      requests.push_back({&generated.cloud, euler_to_pose(e)});
    }
    const auto parallel = render_batch(requests, intr, 1);
    const auto serial = render_batch_reference(requests, intr, 1);
    for (std::size_t i = 0; i < requests.size(); ++i) {
      ACC_CHECK(parallel[i].rgb == serial[i].rgb, "batch rgb mismatch at %zu", i);
      ACC_CHECK(parallel[i].depth == serial[i].depth, "batch depth mismatch at %zu", i);
    }
  }
}

// ---- C4: neural substrate -------------------------------------------------------

void criterion4(std::vector<std::string>& failures) {
  // finite differences on the double-precision reference for every layer type
  const auto check_gradients = [&](const NetworkSpec& spec, std::uint64_t seed,
                                   int batch) {
    Network net(spec);
    Parameters params = net.init_params(seed);
    Rng rng(seed + 1);
    Tensor input({batch, spec.in_c * spec.in_h * spec.in_w});
    for (float& v : input.data) v = rng.normal_f() * 0.5f;
    Tensor append({batch, std::max(1, spec.append)});
    for (float& v : append.data) v = rng.normal_f();
    const Tensor* append_ptr = spec.append > 0 ? &append : nullptr;

    Network::Cache cache;
    net.forward(params, input, append_ptr, &cache);
    std::vector<std::vector<double>> probe;
    std::vector<Tensor> head_grads;
    for (int width : spec.heads) {
      std::vector<double> w(width);
      for (double& v : w) v = rng.uniform(-1, 1);
      Tensor g({batch, width});
      for (int n = 0; n < batch; ++n)
        for (int i = 0; i < width; ++i)
          g.data[static_cast<std::size_t>(n) * width + i] = static_cast<float>(w[i]);
      probe.push_back(std::move(w));
      head_grads.push_back(std::move(g));
    }
    std::vector<float> grad(params.size(), 0.0f);
    net.backward(params, cache, head_grads, grad);

    auto loss_at = [&]() {
      double total = 0.0;
      for (int n = 0; n < batch; ++n) {
        const auto row = input.row(n);
        std::vector<double> row_d(row.begin(), row.end());
        std::vector<double> app_d;
        if (spec.append > 0) {
          const auto arow = append.row(n);
          app_d.assign(arow.begin(), arow.end());
        }
        const auto heads = reference_forward(spec, params, row_d, app_d);
        for (std::size_t h = 0; h < heads.size(); ++h)
          for (std::size_t i = 0; i < heads[h].size(); ++i)
            total += probe[h][i] * heads[h][i];
      }
      return total;
    };

    const double h = 1e-4;
    double max_rel = 0.0;
    const std::size_t log_std_skip =
        spec.learnable_log_std ? params.slice("log_std").offset : params.size();
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (p >= log_std_skip) continue;
      const float saved = params.values[p];
      params.values[p] = static_cast<float>(saved + h);
      const double plus = loss_at();
      params.values[p] = static_cast<float>(saved - h);
      const double minus = loss_at();
      params.values[p] = saved;
      const double fd = (plus - minus) / (2 * h);
      const double an = grad[p];
      if (std::abs(fd) < 1e-6 && std::abs(an) < 1e-6) continue;
      max_rel = std::max(max_rel,
                         std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-2}));
    }
    ACC_CHECK(max_rel < 1e-3, "max relative gradient error %g", max_rel);
  };

  NetworkSpec conv_spec;
  conv_spec.in_c = 2;
  conv_spec.in_h = 5;
  conv_spec.in_w = 6;
  conv_spec.conv = {{3, 3, 2, 1}};
  conv_spec.dense = {6};
  conv_spec.heads = {2, 1};
  conv_spec.learnable_log_std = true;
  check_gradients(conv_spec, 401, 3);

  NetworkSpec mlp_spec;
  mlp_spec.in_c = 1;
  mlp_spec.in_h = 1;
  mlp_spec.in_w = 6;
  mlp_spec.dense = {8, 6};
  mlp_spec.heads = {2};
  check_gradients(mlp_spec, 402, 4);

  NetworkSpec sa_spec;
  sa_spec.in_c = 1;
  sa_spec.in_h = 4;
  sa_spec.in_w = 4;
  sa_spec.conv = {{2, 3, 2, 1}};
  sa_spec.dense = {8};
  sa_spec.append = 3;
  sa_spec.heads = {1};
  check_gradients(sa_spec, 403, 3);

  {  // Adam against the scalar recursion oracle
    const double g = 0.37, lr = 0.05;
    double m = 0, v = 0, w_oracle = 1.0;
    std::vector<float> w{1.0f};
    AdamState state(1);
    AdamConfig config;
    config.lr = static_cast<float>(lr);
    for (int t = 1; t <= 300; ++t) {
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      w_oracle -= lr * (m / (1 - std::pow(0.9, t))) /
                  (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      std::vector<float> grads{static_cast<float>(g)};
      adam_step(w, grads, state, config);
    }
    ACC_CHECK(std::abs(w[0] - w_oracle) < 1e-4, "adam oracle dev %g", w[0] - w_oracle);
  }

  {  // BC overfits a single pair
    NetworkSpec spec;
    spec.in_c = 1;
    spec.in_h = 1;
    spec.in_w = 8;
    spec.dense = {16};
    spec.heads = {6, 1};
    spec.learnable_log_std = true;
    Network policy(spec);
    Parameters params = policy.init_params(404);
    Rng rng(405);
    DemoDataset data;
    data.obs = Tensor({2, 8});
    for (float& v : data.obs.data) v = rng.normal_f();
    std::copy(data.obs.row(0).begin(), data.obs.row(0).end(), data.obs.row(1).begin());
    DemoDataset::Tuple tuple;
    tuple.s = 0;
    tuple.sp = 1;
    tuple.action = {0.3f, -0.2f, 0.5f, 0.1f, -0.4f, 0.2f};
    data.tuples.push_back(tuple);

    TrainConfig config;
    config.bc_lr = 1e-3f;
    config.seed = 406;
    train_bc(policy, params, data, config, 2000);
    const auto out = policy.forward(params, data.obs);
    for (int c = 0; c < 6; ++c)
      ACC_CHECK(std::abs(std::tanh(out[0].data[c]) - tuple.action[c]) < 1e-2,
                "bc overfit channel %d: %g vs %g", c, std::tanh(out[0].data[c]),
                tuple.action[c]);
  }
}

// ---- C5: adversarial mechanics ----------------------------------------------------

void criterion5(std::vector<std::string>& failures) {
  {  // toy MDP ranking
    NetworkSpec spec;
    spec.in_c = 1;
    spec.in_h = 1;
    spec.in_w = 3;
    spec.dense = {16};
    spec.heads = {1};
    Discriminator disc(spec, 0.9f, 501);
    Rng rng(502);
    AdamState rb_state(disc.rb_params.size()), h_state(disc.h_params.size());
    AdamConfig adam;
    adam.lr = 3e-3f;
    auto batch_of = [](const std::vector<int>& states, const std::vector<int>& nexts) {
      DiscBatch batch;
      batch.obs_s = Tensor({static_cast<int>(states.size()), 3});
      batch.obs_sp = Tensor({static_cast<int>(states.size()), 3});
      for (std::size_t i = 0; i < states.size(); ++i) {
        batch.obs_s.data[i * 3 + static_cast<std::size_t>(states[i])] = 1.0f;
        batch.obs_sp.data[i * 3 + static_cast<std::size_t>(nexts[i])] = 1.0f;
      }
      batch.actions = Tensor({static_cast<int>(states.size()), 6});
      batch.logp.assign(states.size(), 0.0f);  // fixed uniform policy
      return batch;
    };
    for (int step = 0; step < 2000; ++step) {
      std::vector<int> agent_s(16), agent_sp(16);
      for (int i = 0; i < 16; ++i) {
        agent_s[i] = static_cast<int>(rng.uniform_int(3));
        agent_sp[i] = static_cast<int>(rng.uniform_int(3));
      }
      const DiscLossResult loss = discriminator_loss(
          disc, batch_of(std::vector<int>(16, 1), std::vector<int>(16, 1)),
          batch_of(agent_s, agent_sp));
      adam_step(disc.rb_params.values, loss.grad_rb, rb_state, adam);
      adam_step(disc.h_params.values, loss.grad_h, h_state, adam);
    }
    std::array<float, 3> rb{};
    for (int i = 0; i < 3; ++i) {
      Tensor s({1, 3});
      s.data[i] = 1.0f;
      rb[i] = disc.rb.forward(disc.rb_params, s)[0].data[0];
    }
    ACC_CHECK(rb[1] > rb[0] && rb[1] > rb[2],
              "r_b ranking: %.3f %.3f %.3f (expert state is 1)", rb[0], rb[1], rb[2]);
  }

  {  // reward identity to 1e-6
    Rng rng(503);
    for (int i = 0; i < 500; ++i) {
      const float r = rng.normal_f() * 2;
      const float lp = rng.normal_f() * 2;
      const double logit = agent_reward(r, lp);
      const double d = 1.0 / (1.0 + std::exp(-(static_cast<double>(r) - lp)));
      ACC_CHECK(std::abs(logit - (std::log(d) - std::log1p(-d))) < 1e-6,
                "reward identity at %d", i);
    }
  }

  {  // PPO bandit
    NetworkSpec spec;
    spec.in_c = 1;
    spec.in_h = 1;
    spec.in_w = 4;
    spec.dense = {16};
    spec.heads = {1, 1};
    spec.learnable_log_std = true;
    Network policy(spec);
    Parameters params = policy.init_params(504);
    Rng rng(505);
    Tensor obs({1, 4});
    for (float& v : obs.data) v = 0.5f;

    TrainConfig config;
    config.ppo_lr = 3e-3f;
    config.ppo_epochs = 4;
    config.batch_size = 64;
    AdamState state(params.size());
    const std::span<const float> log_std_view = params.view("log_std");
    for (int iteration = 0; iteration < 200; ++iteration) {
      RolloutBuffer buffer;
      buffer.obs = Tensor({2, 4});
      std::copy(obs.data.begin(), obs.data.end(), buffer.obs.data.begin());
      std::copy(obs.data.begin(), obs.data.end(), buffer.obs.data.begin() + 4);
      const auto outputs = policy.forward(params, obs);
      const auto mean_row = outputs[0].row(0);
      const int n = 256;
      buffer.actions = Tensor({n, 1});
      buffer.presquash = Tensor({n, 1});
      for (int i = 0; i < n; ++i) {
        std::vector<float> a(1), u(1);
        sample_squashed(mean_row, log_std_view, rng, u, a);
        buffer.actions.data[i] = a[0];
        buffer.presquash.data[i] = u[0];
        buffer.logp.push_back(static_cast<float>(squashed_log_prob(
            mean_row, log_std_view, std::span<const float>(u),
            std::span<const float>(a))));
        buffer.s_idx.push_back(0);
        buffer.sp_idx.push_back(1);
        buffer.terminal.push_back(1);
        buffer.episode_end.push_back(1);
        buffer.env_index.push_back(0);
        buffer.reward.push_back(-a[0] * a[0]);
      }
      buffer.episodes = n;
      buffer.value.assign(n, 0.0f);
      buffer.advantage.assign(n, 0.0f);
      buffer.ret.assign(n, 0.0f);
      const std::vector<float> values = value_all_obs(policy, params, buffer);
      compute_gae(buffer, values, config);
      Rng ppo_rng(Rng::derive(506, "ppo", static_cast<std::uint64_t>(iteration)));
      ppo_update(policy, params, state, buffer, config, ppo_rng);
    }
    const auto out = policy.forward(params, obs);
    const double mean_action = std::tanh(out[0].data[0]);
    ACC_CHECK(std::abs(mean_action) < 0.1, "bandit mean action %g", mean_action);
  }
}

// ---- C6: metrics ------------------------------------------------------------------

void criterion6(std::vector<std::string>& failures) {
  auto record = [](const Vec3& start, const Vec3& end, int steps, bool success) {
    EpisodeRecord r;
    r.start.x = start.x;
    r.start.y = start.y;
    r.start.z = start.z;
    EulerPose final;
    final.x = end.x;
    final.y = end.y;
    final.z = end.z;
    r.poses.assign(static_cast<std::size_t>(steps), final);
    r.steps = steps;
    r.success = success;
    return r;
  };

  Rng rng(601);
  std::vector<EpisodeRecord> records;
  for (int i = 0; i < 200; ++i)
    records.push_back(record({rng.uniform(-5, 5), 0, 0}, {rng.uniform(-5, 5), 4, 2},
                             1 + static_cast<int>(rng.uniform_int(15)),
                             rng.uniform() < 0.4));

  // brute-force recomputation must match exactly
  double brute_successes = 0;
  for (const auto& r : records) brute_successes += r.success ? 1 : 0;
  ACC_CHECK(success_rate(records) == 100.0 * brute_successes / records.size(),
            "sr mismatch");
  double num = 0, den = 0;
  for (const auto& r : records) {
    if (!r.success) continue;
    num += norm(r.poses.back().position() - r.start.position()) / r.steps;
    den += 1;
  }
  const auto aeff = action_efficiency(records);
  ACC_CHECK(aeff.has_value() && *aeff == num / den, "a_eff mismatch");

  // zig-zag vs straight
  std::vector<EpisodeRecord> straight{record({0, 0, 0}, {8, 0, 0}, 4, true)};
  std::vector<EpisodeRecord> zigzag{record({0, 0, 0}, {4, 0, 0}, 8, true)};
  ACC_CHECK(*action_efficiency(straight) == 2.0, "straight a_eff");
  ACC_CHECK(*action_efficiency(zigzag) == 0.5, "zig-zag a_eff");
  ACC_CHECK(*action_efficiency(zigzag) < *action_efficiency(straight), "ordering");

  // rotation deviation endpoints
  ACC_CHECK(rotation_geodesic(Mat3::identity(), Mat3::identity()) == 0.0,
            "identity geodesic");
  EulerPose flip;
  flip.alpha = kPi;
  ACC_CHECK(std::abs(rotation_geodesic(Mat3::identity(),
                                       euler_to_pose(flip).rotation) -
                     kPi) < 1e-12,
            "pi geodesic");
}

// ---- C7/C8 shared pipeline --------------------------------------------------------

struct PipelineArtifacts {
  RunConfig config;
  fs::path work;
  Manifest train_manifest;
  Manifest test_manifest;
  std::vector<std::shared_ptr<const PointCloudScene>> train_scenes;  // per env entry
  std::vector<WaypointTrajectory> train_experts;
  DemoDataset demos32;
  double seconds_generate = 0.0;
};

PipelineArtifacts build_pipeline(const fs::path& work) {
  PipelineArtifacts art;
  art.work = work;
  art.config = load_config(std::string(SCOPESIM_SOURCE_DIR) +
                           "/configs/acceptance_micro.cfg");
  const double t0 = now_s();
  fs::remove_all(work);
  write_scene_suite((work / "suite").string(), art.config, 10, 8);
  art.train_manifest = read_manifest((work / "suite" / "train.manifest").string());
  art.test_manifest = read_manifest((work / "suite" / "test.manifest").string());

  // in-memory experts and rate-32 demo dataset
  const fs::path dir(art.train_manifest.directory);
  std::map<std::string, std::shared_ptr<const PointCloudScene>> cache;
  std::vector<DemoSource> sources;
  std::size_t index = 0;
  for (const ManifestEntry& entry : art.train_manifest.envs()) {
    auto it = cache.find(entry.scene_path);
    if (it == cache.end())
      it = cache
               .emplace(entry.scene_path,
                        std::make_shared<PointCloudScene>(
                            load_scene((dir / entry.scene_path).string())))
               .first;
    art.train_scenes.push_back(it->second);
    art.train_experts.push_back(
        load_waypoints((dir / entry.trajectory_path).string(), art.config.pre));
    AugmentationParams params = art.config.spta;
    params.rate = 32;
    const auto augmented = augment_dataset(
        {art.train_experts.back()}, params,
        Rng::derive(art.config.master_seed, "spta", index), art.config.env.action_limits());
    for (const auto& aug : augmented)
      sources.push_back(DemoSource{it->second.get(), aug.trajectory});
    ++index;
  }
  art.demos32 =
      build_demo_dataset(sources, art.config.env, art.config.train.depth_scale_mm);
  art.seconds_generate = now_s() - t0;
  return art;
}

std::vector<SceneEnvironment> make_train_envs(const PipelineArtifacts& art) {
  std::vector<SceneEnvironment> envs;
  for (std::size_t i = 0; i < art.train_scenes.size(); ++i) {
    Rng rng(Rng::derive(art.config.master_seed, "env-workspace", i));
    const Workspace ws =
        workspace_from_trajectory(art.train_experts[i], art.config.spta, rng);
    envs.emplace_back(art.train_scenes[i], art.train_experts[i], ws, art.config.env);
  }
  return envs;
}

std::vector<SceneEnvironment> make_test_envs(const PipelineArtifacts& art) {
  return load_environments(art.test_manifest, art.config.env, art.config.pre,
                           art.config.spta,
                           Rng::derive(art.config.master_seed, "env"));
}

double eval_sr(const Network& policy, const Parameters& params,
               const PipelineArtifacts& art) {
  std::vector<SceneEnvironment> envs = make_test_envs(art);
  PolicyController controller(policy, params, art.config.train.depth_scale_mm);
  EvalOptions options;
  options.episodes_per_scene = art.config.eval_episodes;
  options.seed = Rng::derive(art.config.master_seed, "eval");
  return evaluate_policy(controller, envs, options).sr_mean;
}

struct C7Numbers {
  double sr_random = -1, sr_bc = -1, sr_gail = -1, sr_illc = -1;
  double train_seconds = 0;
  bool valid = false;
};

C7Numbers g_c7;

void criterion7(std::vector<std::string>& failures) {
  const PipelineArtifacts art = build_pipeline("acceptance_work");
  const double t0 = now_s();

  const NetworkSpec policy_spec =
      NetworkSpec::policy(4, art.config.env.obs_height, art.config.env.obs_width);
  Network policy(policy_spec);
  Parameters prior =
      policy.init_params(Rng::derive(art.config.master_seed, "policy-init"));
  TrainConfig train = art.config.train;
  train.seed = Rng::derive(art.config.master_seed, "train");
  train_bc(policy, prior, art.demos32, train, train.bc_epochs);

  // ILLC
  Discriminator disc(
      NetworkSpec::reward(4, art.config.env.obs_height, art.config.env.obs_width),
      train.discount, Rng::derive(art.config.master_seed, "disc"));
  std::ofstream illc_log((art.work / "illc_train.log").string());
  IllcResult illc;
  {
    std::vector<SceneEnvironment> env_list = make_train_envs(art);
    VectorEnv envs(std::move(env_list));
    illc = train_illc(policy, prior, disc, envs, art.demos32, train, &illc_log);
  }

  // GAIL from the same prior with the same budget
  GailDiscriminator gail_disc(
      NetworkSpec::state_action_classifier(4, art.config.env.obs_height,
                                           art.config.env.obs_width),
      Rng::derive(art.config.master_seed, "disc-gail"));
  std::ofstream gail_log((art.work / "gail_train.log").string());
  IllcResult gail;
  {
    std::vector<SceneEnvironment> env_list = make_train_envs(art);
    VectorEnv envs(std::move(env_list));
    gail = train_gail(policy, prior, gail_disc, envs, art.demos32, train, &gail_log);
  }
  g_c7.train_seconds = now_s() - t0;

  g_c7.sr_bc = eval_sr(policy, prior, art);
  g_c7.sr_illc = eval_sr(policy, illc.policy, art);
  g_c7.sr_gail = eval_sr(policy, gail.policy, art);
  {
    std::vector<SceneEnvironment> envs = make_test_envs(art);
    RandomController controller(Rng::derive(art.config.master_seed, "random"));
    EvalOptions options;
    options.episodes_per_scene = art.config.eval_episodes;
    options.seed = Rng::derive(art.config.master_seed, "eval");
    g_c7.sr_random = evaluate_policy(controller, envs, options).sr_mean;
  }
  g_c7.valid = true;

  std::printf("    table-II analog: random %.1f | bc %.1f | gail %.1f | illc %.1f "
              "(train %.0f s)\n",
              g_c7.sr_random, g_c7.sr_bc, g_c7.sr_gail, g_c7.sr_illc,
              g_c7.train_seconds);
  ACC_CHECK(g_c7.sr_random == 0.0, "random SR %.2f != 0", g_c7.sr_random);
  ACC_CHECK(g_c7.sr_illc > g_c7.sr_bc, "ILLC %.2f !> BC %.2f", g_c7.sr_illc, g_c7.sr_bc);
  ACC_CHECK(g_c7.sr_illc >= 50.0, "ILLC %.2f < 50", g_c7.sr_illc);
  ACC_CHECK(g_c7.sr_illc > g_c7.sr_gail, "ILLC %.2f !> GAIL %.2f", g_c7.sr_illc,
            g_c7.sr_gail);
  ACC_CHECK(g_c7.sr_gail > g_c7.sr_random, "GAIL %.2f !> random", g_c7.sr_gail);
  ACC_CHECK(g_c7.sr_bc > g_c7.sr_random, "BC %.2f !> random", g_c7.sr_bc);
  ACC_CHECK(g_c7.train_seconds < 3600.0, "training budget %.0f s >= 3600",
            g_c7.train_seconds);
}

void criterion8(std::vector<std::string>& failures) {
  RunConfig config = load_config(std::string(SCOPESIM_SOURCE_DIR) +
                                 "/configs/acceptance_micro.cfg");
  const fs::path work("acceptance_work");
  if (!fs::exists(work / "suite" / "train.manifest"))
    write_scene_suite((work / "suite").string(), config, 10, 8);

  const double t0 = now_s();
  AblationConfig ablation;
  ablation.train_manifest = read_manifest((work / "suite" / "train.manifest").string());
  ablation.test_manifest = read_manifest((work / "suite" / "test.manifest").string());
  ablation.env_config = config.env;
  ablation.pre = config.pre;
  ablation.spta = config.spta;
  ablation.train = config.train;
  ablation.episodes_per_scene = config.eval_episodes;
  ablation.seed = config.master_seed;

  const AblationResult result = run_ablation(ablation, nullptr);
  const double elapsed = now_s() - t0;
  write_ablation_table((work / "ablation.tsv").string(), result);
  write_rate_curve((work / "spta_rate_curve.tsv").string(), result);

  auto row = [&](const std::string& needle) -> double {
    for (const AblationRow& r : result.rows)
      if (r.name.find(needle) != std::string::npos) return r.sr;
    failures.push_back("missing ablation row: " + needle);
    return -1;
  };
  const double sr0 = row("no_spta");
  const double sr8 = row("spta@8x");
  const double sr32 = row("base_spta@32x");
  const double sr_noprior = row("no_prior");
  const double sr_nodepth = row("no_depth");
  std::printf("    table-III analog: spta 0/8/32 = %.1f/%.1f/%.1f | no_prior %.1f | "
              "no_depth %.1f (%.0f s)\n",
              sr0, sr8, sr32, sr_noprior, sr_nodepth, elapsed);

  ACC_CHECK(sr32 >= sr8, "SR(32x) %.2f < SR(8x) %.2f", sr32, sr8);
  ACC_CHECK(sr8 >= sr0, "SR(8x) %.2f < SR(0) %.2f", sr8, sr0);
  ACC_CHECK(sr32 >= sr_noprior, "SR(prior) %.2f < SR(no prior) %.2f", sr32, sr_noprior);
  ACC_CHECK(sr32 >= sr_nodepth, "SR(depth) %.2f < SR(no depth) %.2f", sr32, sr_nodepth);
  ACC_CHECK(elapsed < 10800.0, "ablation budget %.0f s >= 10800", elapsed);
}

// ---- C9: end-to-end determinism ----------------------------------------------------

void criterion9(std::vector<std::string>& failures) {
  RunConfig config = load_config(std::string(SCOPESIM_SOURCE_DIR) +
                                 "/configs/acceptance_micro.cfg");
  // reduced budget: determinism does not depend on training length
  config.scene.point_count = 8000;
  config.demos_per_train_scene = 2;
  config.train.iterations = 2;
  config.train.bc_epochs = 2;
  config.train.rollout_capacity = 256;
  config.spta.rate = 2;
  config.eval_episodes = 4;

  auto run_pipeline = [&](const fs::path& work) {
    fs::remove_all(work);
    write_scene_suite((work / "suite").string(), config, 3, 2);
    const Manifest train_manifest =
        read_manifest((work / "suite" / "train.manifest").string());
    write_augmented_suite((work / "aug").string(), train_manifest, config);
    const Manifest aug_manifest =
        read_manifest((work / "aug" / "augmented.manifest").string());

    const NetworkSpec policy_spec =
        NetworkSpec::policy(4, config.env.obs_height, config.env.obs_width);
    Network policy(policy_spec);
    Parameters params =
        policy.init_params(Rng::derive(config.master_seed, "policy-init"));
    const DemoDataset demos = build_demo_dataset(
        aug_manifest, config.env, config.pre, config.train.depth_scale_mm);
    TrainConfig train = config.train;
    train.seed = Rng::derive(config.master_seed, "train");
    train_bc(policy, params, demos, train, train.bc_epochs);

    Discriminator disc(
        NetworkSpec::reward(4, config.env.obs_height, config.env.obs_width),
        train.discount, Rng::derive(config.master_seed, "disc"));
    std::vector<SceneEnvironment> env_list =
        load_environments(aug_manifest, config.env, config.pre, config.spta,
                          Rng::derive(config.master_seed, "env"));
    VectorEnv envs(std::move(env_list));
    const IllcResult result =
        train_illc(policy, std::move(params), disc, envs, demos, train);

    Checkpoint ckpt{policy_spec, config.master_seed, train.iterations, result.policy};
    save_checkpoint((work / "policy.net").string(), ckpt);

    std::vector<SceneEnvironment> test_envs =
        load_environments(read_manifest((work / "suite" / "test.manifest").string()),
                          config.env, config.pre, config.spta,
                          Rng::derive(config.master_seed, "env"));
    PolicyController controller(policy, result.policy, train.depth_scale_mm);
    EvalOptions options;
    options.episodes_per_scene = config.eval_episodes;
    options.seed = Rng::derive(config.master_seed, "eval");
    options.policy_id = "determinism-check";
    const EvaluationReport report = evaluate_policy(controller, test_envs, options);
    write_report_tsv((work / "report.tsv").string(), report);
  };

  run_pipeline("acceptance_det_a");
  run_pipeline("acceptance_det_b");

  auto file_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
  };
  ACC_CHECK(file_bytes("acceptance_det_a/report.tsv") ==
                file_bytes("acceptance_det_b/report.tsv"),
            "evaluation reports differ between runs");
  ACC_CHECK(file_bytes("acceptance_det_a/policy.net") ==
                file_bytes("acceptance_det_b/policy.net"),
            "policy checkpoints differ between runs");
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  const std::vector<Criterion> criteria{
      {1, "geometry/trajectory exactness", criterion1},
      {2, "SPTA guarantees", criterion2},
      {3, "renderer correctness", criterion3},
      {4, "neural substrate", criterion4},
      {5, "adversarial mechanics", criterion5},
      {6, "metrics", criterion6},
      {7, "desk-scale comparison analog", criterion7},
      {8, "desk-scale ablation analog", criterion8},
      {9, "end-to-end determinism", criterion9},
  };
  const double budgets_s[] = {0, 10, 30, 60, 120, 300, 10, 3600, 10800, 1800};

  bool all_pass = true;
  for (const Criterion& criterion : criteria) {
    if (only != 0 && criterion.id != only) continue;
    std::vector<std::string> failures;
    const double t0 = now_s();
    try {
      criterion.body(failures);
    } catch (const std::exception& e) {
      failures.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed = now_s() - t0;
    if (elapsed > budgets_s[criterion.id])
      failures.push_back("runtime " + std::to_string(elapsed) + " s over budget " +
                         std::to_string(budgets_s[criterion.id]) + " s");
    if (failures.empty()) {
      std::printf("[PASS] C%d %s (%.1f s)\n", criterion.id, criterion.name.c_str(),
                  elapsed);
    } else {
      all_pass = false;
      std::printf("[FAIL] C%d %s (%.1f s)\n", criterion.id, criterion.name.c_str(),
                  elapsed);
      for (const std::string& f : failures) std::printf("       %s\n", f.c_str());
    }
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
