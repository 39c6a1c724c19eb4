#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scopesim/env.hpp"
#include "scopesim/neural.hpp"

namespace scopesim {

struct TrainConfig {
  float ppo_lr = 1e-5f;
  float disc_lr = 3e-4f;
  int batch_size = 64;
  int rollout_capacity = 4096;
  float ppo_clip = 0.2f;
  float gae_lambda = 0.95f;
  float discount = 0.99f;
  float entropy_weight = 1e-3f;
  float value_weight = 0.5f;
  int ppo_epochs = 4;
  int disc_epochs = 1;  // passes over the rollout buffer per iteration
  int disc_steps_per_iter = 0;  // explicit cap; 0 derives from disc_epochs
  // Updates are skipped while the discriminator classifies a minibatch better
  // than this, which keeps it at an informative operating point instead of
  // saturating on the noise signature of stochastic rollouts.
  float disc_accuracy_cap = 0.75f;
  float reward_clip = 5.0f;     // relabeled rewards clamped to +/- this
  int iterations = 100;
  float bc_lr = 3e-4f;
  int bc_epochs = 20;
  bool prior_policy = true;
  float depth_scale_mm = 100.0f;
  std::uint64_t seed = 1;
};

// ---- observation featurization ----------------------------------------------

/// Channel-planar network input: R, G, B, depth/depth_scale, each H*W.
std::size_t obs_feature_count(int width, int height);
void obs_to_row(const RGBDImage& obs, float depth_scale_mm, std::span<float> out);

// ---- expert demonstrations ---------------------------------------------------

/// Rendered expert state-action tuples; observations are stored once per
/// waypoint and tuples reference them by row.
struct DemoDataset {
  Tensor obs;  // [M, features]
  struct Tuple {
    int s = 0;
    int sp = 0;
    std::array<float, 6> action{};  // normalized to [-1,1]
  };
  std::vector<Tuple> tuples;

  std::size_t size() const { return tuples.size(); }
};

struct DemoSource {
  const PointCloudScene* scene = nullptr;
  WaypointTrajectory trajectory;
};

DemoDataset build_demo_dataset(const std::vector<DemoSource>& sources,
                               const EnvConfig& config, float depth_scale_mm);

/// Loads every `demo` manifest entry (scenes cached, raw trajectories
/// preprocessed) and renders the dataset.
DemoDataset build_demo_dataset(const Manifest& manifest, const EnvConfig& config,
                               const PreprocessParams& pre, float depth_scale_mm);

// ---- rollout buffer -----------------------------------------------------------

struct RolloutBuffer {
  Tensor obs;  // [K, features]; includes terminal observations
  std::vector<int> s_idx, sp_idx;
  Tensor actions;    // [N, 6] squashed
  Tensor presquash;  // [N, 6]
  std::vector<float> logp, value, reward, advantage, ret;
  std::vector<std::uint8_t> terminal;     // success: no bootstrap past here
  std::vector<std::uint8_t> episode_end;  // last step of an episode segment
  std::vector<int> env_index;
  int episodes = 0;
  int successes = 0;

  std::size_t size() const { return s_idx.size(); }
  float exploration_sr() const {
    return episodes ? 100.0f * successes / episodes : 0.0f;
  }
};

/// Fill a buffer with at most `capacity` steps across the vector env,
/// sampling from the squashed Gaussian policy. Environments reset themselves
/// on episode end with per-env seed streams, so results do not depend on the
/// thread count.
RolloutBuffer collect_rollouts(const Network& policy, const Parameters& params,
                               VectorEnv& envs, int capacity, std::uint64_t seed,
                               float depth_scale_mm);

/// Policy values for every stored observation (one batched forward).
std::vector<float> value_all_obs(const Network& policy, const Parameters& params,
                                 const RolloutBuffer& buffer);

/// GAE advantages and returns from buffer rewards; fills value, advantage,
/// ret.
void compute_gae(RolloutBuffer& buffer, const std::vector<float>& values,
                 const TrainConfig& config);

// ---- behavior cloning ---------------------------------------------------------

struct BcResult {
  std::vector<float> loss_per_epoch;
};

/// Maximum-likelihood prior policy: Adam on the mean negative log-probability
/// of expert actions under the squashed Gaussian.
BcResult train_bc(const Network& policy, Parameters& params, const DemoDataset& data,
                  const TrainConfig& config, int epochs);

// ---- discriminator -------------------------------------------------------------

/// Reward/shaping pair: r_theta(s, a, s') = r_b(s) + gamma*h(s') - h(s), with
/// identical topologies and separate weights.
struct Discriminator {
  NetworkSpec spec;
  Network rb;
  Network h;
  Parameters rb_params;
  Parameters h_params;
  float gamma_d = 0.99f;

  Discriminator(NetworkSpec s, float gamma, std::uint64_t seed);
};

struct DiscBatch {
  Tensor obs_s;       // [B, features]
  Tensor obs_sp;      // [B, features]
  Tensor actions;     // [B, 6]
  std::vector<float> logp;  // log pi(a|s) under the current policy
};

struct DiscLossResult {
  double loss = 0.0;
  double accuracy = 0.0;
  int dropped = 0;  // non-finite log-probs excluded from the batch
  std::vector<float> grad_rb;
  std::vector<float> grad_h;
};

/// Cross-entropy loss for D = sigmoid(r_theta - log pi); expert labeled 1.
DiscLossResult discriminator_loss(const Discriminator& disc, const DiscBatch& expert,
                                  const DiscBatch& agent);

/// r_theta for a batch of (s, s') pairs.
std::vector<float> disc_r_theta(const Discriminator& disc, const Tensor& obs_s,
                                const Tensor& obs_sp);

/// Recovered agent reward log D - log(1-D) = r_theta - log pi.
double agent_reward(float r_theta, float log_pi);

// ---- PPO ------------------------------------------------------------------------

struct PpoStats {
  float policy_loss = 0.0f;
  float value_loss = 0.0f;
  float entropy = 0.0f;
};

/// One PPO update (ppo_epochs passes of clipped-surrogate minibatches) on a
/// buffer whose advantage/return fields are filled.
PpoStats ppo_update(const Network& policy, Parameters& params, AdamState& state,
                    const RolloutBuffer& buffer, const TrainConfig& config, Rng& rng);

// ---- adversarial training loops ---------------------------------------------------

struct IterRecord {
  int iteration = 0;
  float disc_loss = 0.0f;
  float disc_accuracy = 0.0f;
  float policy_loss = 0.0f;
  float value_loss = 0.0f;
  float train_sr = 0.0f;
  int dropped = 0;
  double wall_s = 0.0;
};

using IterationHook = std::function<void(const IterRecord&, const Parameters&)>;

struct IllcResult {
  Parameters policy;
  std::vector<IterRecord> log;
  RolloutBuffer last_buffer;
};

/// Alternating loop: collect rollouts, update the discriminator on mixed
/// expert/agent minibatches, relabel every buffer reward with the updated
/// discriminator, then run PPO on the relabeled buffer.
IllcResult train_illc(const Network& policy, Parameters policy_init,
                      Discriminator& disc, VectorEnv& envs, const DemoDataset& demos,
                      const TrainConfig& config, std::ostream* log_stream = nullptr,
                      const IterationHook& hook = {});

/// Same loop with an unstructured (s, a) classifier and reward -log(1 - D).
struct GailDiscriminator {
  NetworkSpec spec;
  Network net;
  Parameters params;

  GailDiscriminator(NetworkSpec s, std::uint64_t seed);
};

/// Cross-entropy loss of the unstructured (s, a) classifier.
struct GailLossResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<float> grad;
};
GailLossResult gail_discriminator_loss(const GailDiscriminator& disc,
                                       const DiscBatch& expert, const DiscBatch& agent);

IllcResult train_gail(const Network& policy, Parameters policy_init,
                      GailDiscriminator& disc, VectorEnv& envs,
                      const DemoDataset& demos, const TrainConfig& config,
                      std::ostream* log_stream = nullptr, const IterationHook& hook = {});

/// Append one training-log line per record: "iter=... disc_loss=... ...".
void write_log_record(std::ostream& out, const IterRecord& record);

}  // namespace scopesim
