#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scopesim/rng.hpp"

namespace scopesim {

/// Row-major float32 tensor with a leading batch dimension.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    data.assign(n, 0.0f);
  }

  int batch() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t row_size() const { return batch() ? data.size() / batch() : 0; }
  std::span<float> row(int n) {
    return std::span<float>(data.data() + static_cast<std::size_t>(n) * row_size(),
                            row_size());
  }
  std::span<const float> row(int n) const {
    return std::span<const float>(data.data() + static_cast<std::size_t>(n) * row_size(),
                                  row_size());
  }
};

struct ConvSpec {
  int out_channels = 0;
  int kernel = 3;
  int stride = 2;
  int pad = 1;
};

/// Architecture description: a conv stack (each layer ReLU), flatten with an
/// optional appended feature vector, a ReLU MLP, and linear heads sharing the
/// last hidden activation.
struct NetworkSpec {
  int in_c = 4, in_h = 64, in_w = 80;
  std::vector<ConvSpec> conv;
  std::vector<int> dense;
  int append = 0;  // extra features concatenated after the conv flatten
  std::vector<int> heads;
  bool learnable_log_std = false;
  float log_std_init = -0.5f;

  std::string to_string() const;
  static NetworkSpec from_string(const std::string& text);

  /// Shared-encoder policy/value network: 6 conv layers, dense (128, 64),
  /// heads of width action_dim and 1, plus a learnable log-std vector.
  static NetworkSpec policy(int c, int h, int w, int action_dim = 6);
  /// Reward / shaping network: 2 conv layers then a [32, 32, 1] MLP.
  static NetworkSpec reward(int c, int h, int w);
  /// State-action classifier: the reward topology with the action vector
  /// appended to the MLP input.
  static NetworkSpec state_action_classifier(int c, int h, int w, int action_dim = 6);
};

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat parameter array with named slices per layer.
struct Parameters {
  std::vector<float> values;
  std::vector<ParamSlice> slices;

  std::size_t size() const { return values.size(); }
  const ParamSlice& slice(const std::string& name) const;
  bool has_slice(const std::string& name) const;
  std::span<float> view(const std::string& name);
  std::span<const float> view(const std::string& name) const;
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  std::size_t param_count() const { return param_count_; }
  std::size_t feature_width() const { return feature_width_; }

  /// He-uniform weights, zero biases, log_std at its configured init.
  Parameters init_params(std::uint64_t seed) const;

  struct Cache {
    Tensor input;
    Tensor append;
    std::vector<Tensor> activations;  // post-activation per trunk layer
  };

  /// Input rows are flattened C*H*W observations. Returns one tensor per
  /// head. `append` must carry spec().append extra features per row when the
  /// spec declares them. The cache, when supplied, enables backward().
  std::vector<Tensor> forward(const Parameters& params, const Tensor& input,
                              const Tensor* append = nullptr, Cache* cache = nullptr,
                              bool parallel = true) const;

  /// Accumulates dLoss/dparams into `grad` given per-head output gradients.
  /// Gradient reductions run over samples in a fixed order, so results do not
  /// depend on the thread count.
  void backward(const Parameters& params, const Cache& cache,
                const std::vector<Tensor>& head_grads, std::vector<float>& grad,
                bool parallel = true) const;

  /// Last hidden activation (the input the heads share), one row per sample.
  const Tensor& features(const Cache& cache) const;

 private:
  struct Layer {
    enum class Kind { Conv, Dense } kind = Kind::Dense;
    bool relu = true;
    // conv geometry
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0, out_h = 0, out_w = 0;
    int kernel = 0, stride = 1, pad = 0;
    // dense geometry
    int in_f = 0, out_f = 0;
    std::size_t w_off = 0, b_off = 0;
    std::string name;
  };

  NetworkSpec spec_;
  std::vector<Layer> trunk_;
  std::vector<Layer> heads_;
  std::size_t param_count_ = 0;
  std::size_t feature_width_ = 0;
  std::size_t flat_width_ = 0;  // conv flatten width, before append
  std::vector<ParamSlice> slices_;
  std::size_t log_std_offset_ = 0;
};

// ---- Gaussian policy head -------------------------------------------------

constexpr float kLogStdMin = -5.0f;
constexpr float kLogStdMax = 2.0f;

float clamp_log_std(float log_std);

/// Log-density of a tanh-squashed Gaussian: channel-wise normal log-pdf of
/// the pre-squash value minus the tanh change-of-variable correction
/// sum(log(1 - a^2)).
double squashed_log_prob(std::span<const float> mean, std::span<const float> log_std,
                         std::span<const float> presquash, std::span<const float> action);

/// As above but inverting the squash; action components are clamped to
/// +/-(1 - 1e-6) before atanh.
double squashed_log_prob_from_action(std::span<const float> mean,
                                     std::span<const float> log_std,
                                     std::span<const float> action);

void presquash_of_action(std::span<const float> action, std::span<float> presquash);

/// Draw u = mean + std*eps and a = tanh(u).
void sample_squashed(std::span<const float> mean, std::span<const float> log_std,
                     Rng& rng, std::span<float> presquash, std::span<float> action);

/// d(log prob)/d(mean_i) and d(log prob)/d(log_std_i) at fixed presquash.
void squashed_log_prob_grad(std::span<const float> mean, std::span<const float> log_std,
                            std::span<const float> presquash,
                            std::span<float> d_mean, std::span<float> d_log_std);

/// Entropy of the pre-squash Gaussian (the standard bonus term).
double gaussian_entropy(std::span<const float> log_std);

// ---- Adam ------------------------------------------------------------------

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  std::int64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0f), v(n, 0.0f) {}
};

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// One bias-corrected Adam step. Returns false (and changes nothing) when the
/// gradient contains non-finite entries.
bool adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const AdamConfig& config);

// ---- Checkpoints -----------------------------------------------------------

struct Checkpoint {
  NetworkSpec spec;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  Parameters params;
};

/// Text manifest (spec, seed, step count, slice table) followed by the raw
/// little-endian float32 parameter blob; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace scopesim
