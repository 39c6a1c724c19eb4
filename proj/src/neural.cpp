#include "scopesim/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoints store little-endian float32 blobs");

namespace scopesim {

// ---- spec ------------------------------------------------------------------

std::string NetworkSpec::to_string() const {
  std::ostringstream out;
  out << "in=" << in_c << "x" << in_h << "x" << in_w << ";conv=";
  for (std::size_t i = 0; i < conv.size(); ++i) {
    if (i) out << ",";
    out << conv[i].out_channels << "k" << conv[i].kernel << "s" << conv[i].stride
        << "p" << conv[i].pad;
  }
  out << ";dense=";
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (i) out << ",";
    out << dense[i];
  }
  out << ";append=" << append << ";heads=";
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (i) out << ",";
    out << heads[i];
  }
  if (learnable_log_std) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(log_std_init));
    out << ";logstd=" << buf;
  }
  return out.str();
}

NetworkSpec NetworkSpec::from_string(const std::string& text) {
  NetworkSpec spec;
  spec.heads.clear();
  std::istringstream in(text);
  std::string section;
  bool saw_heads = false;
  while (std::getline(in, section, ';')) {
    const auto eq = section.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("network spec: bad section '" + section + "'");
    const std::string key = section.substr(0, eq);
    const std::string value = section.substr(eq + 1);
    if (key == "in") {
      if (std::sscanf(value.c_str(), "%dx%dx%d", &spec.in_c, &spec.in_h, &spec.in_w) != 3)
        throw std::invalid_argument("network spec: bad input shape '" + value + "'");
    } else if (key == "conv") {
      spec.conv.clear();
      std::istringstream cs(value);
      std::string item;
      while (std::getline(cs, item, ',')) {
        ConvSpec c;
        if (std::sscanf(item.c_str(), "%dk%ds%dp%d", &c.out_channels, &c.kernel,
                        &c.stride, &c.pad) != 4)
          throw std::invalid_argument("network spec: bad conv layer '" + item + "'");
        spec.conv.push_back(c);
      }
    } else if (key == "dense") {
      spec.dense.clear();
      std::istringstream ds(value);
      std::string item;
      while (std::getline(ds, item, ',')) spec.dense.push_back(std::stoi(item));
    } else if (key == "append") {
      spec.append = std::stoi(value);
    } else if (key == "heads") {
      std::istringstream hs(value);
      std::string item;
      while (std::getline(hs, item, ',')) spec.heads.push_back(std::stoi(item));
      saw_heads = true;
    } else if (key == "logstd") {
      spec.learnable_log_std = true;
      spec.log_std_init = std::stof(value);
    } else {
      throw std::invalid_argument("network spec: unknown key '" + key + "'");
    }
  }
  if (!saw_heads || spec.heads.empty())
    throw std::invalid_argument("network spec: heads are required");
  return spec;
}

NetworkSpec NetworkSpec::policy(int c, int h, int w, int action_dim) {
  NetworkSpec spec;
  spec.in_c = c;
  spec.in_h = h;
  spec.in_w = w;
  for (int oc : {8, 16, 16, 32, 32, 32}) spec.conv.push_back({oc, 3, 2, 1});
  spec.dense = {128, 64};
  spec.heads = {action_dim, 1};
  spec.learnable_log_std = true;
  return spec;
}

NetworkSpec NetworkSpec::reward(int c, int h, int w) {
  NetworkSpec spec;
  spec.in_c = c;
  spec.in_h = h;
  spec.in_w = w;
  spec.conv = {{8, 3, 4, 1}, {16, 3, 4, 1}};
  spec.dense = {32, 32};
  spec.heads = {1};
  return spec;
}

NetworkSpec NetworkSpec::state_action_classifier(int c, int h, int w, int action_dim) {
  NetworkSpec spec = reward(c, h, w);
  spec.append = action_dim;
  return spec;
}

// ---- parameters ------------------------------------------------------------

const ParamSlice& Parameters::slice(const std::string& name) const {
  for (const ParamSlice& s : slices)
    if (s.name == name) return s;
  throw std::invalid_argument("no parameter slice named '" + name + "'");
}

bool Parameters::has_slice(const std::string& name) const {
  for (const ParamSlice& s : slices)
    if (s.name == name) return true;
  return false;
}

std::span<float> Parameters::view(const std::string& name) {
  const ParamSlice& s = slice(name);
  return std::span<float>(values.data() + s.offset, s.size);
}

std::span<const float> Parameters::view(const std::string& name) const {
  const ParamSlice& s = slice(name);
  return std::span<const float>(values.data() + s.offset, s.size);
}

// ---- network ---------------------------------------------------------------

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.heads.empty()) throw std::invalid_argument("network: no heads");
  if (spec_.conv.empty() && spec_.dense.empty())
    throw std::invalid_argument("network: needs at least one trunk layer");

  std::size_t offset = 0;
  auto add_slice = [&](const std::string& name, std::size_t size) {
    slices_.push_back({name, offset, size});
    const std::size_t at = offset;
    offset += size;
    return at;
  };

  int c = spec_.in_c, h = spec_.in_h, w = spec_.in_w;
  for (std::size_t i = 0; i < spec_.conv.size(); ++i) {
    const ConvSpec& cs = spec_.conv[i];
    Layer layer;
    layer.kind = Layer::Kind::Conv;
    layer.name = "conv" + std::to_string(i);
    layer.in_c = c;
    layer.in_h = h;
    layer.in_w = w;
    layer.out_c = cs.out_channels;
    layer.kernel = cs.kernel;
    layer.stride = cs.stride;
    layer.pad = cs.pad;
    layer.out_h = (h + 2 * cs.pad - cs.kernel) / cs.stride + 1;
    layer.out_w = (w + 2 * cs.pad - cs.kernel) / cs.stride + 1;
    if (layer.out_h < 1 || layer.out_w < 1 || cs.out_channels < 1 || cs.kernel < 1 ||
        cs.stride < 1)
      throw std::invalid_argument("network: conv" + std::to_string(i) +
                                  " produces an empty output");
    layer.w_off = add_slice(layer.name + ".w",
                            static_cast<std::size_t>(layer.out_c) * layer.in_c *
                                layer.kernel * layer.kernel);
    layer.b_off = add_slice(layer.name + ".b", static_cast<std::size_t>(layer.out_c));
    trunk_.push_back(layer);
    c = layer.out_c;
    h = layer.out_h;
    w = layer.out_w;
  }

  flat_width_ = static_cast<std::size_t>(c) * h * w;
  std::size_t width = flat_width_ + static_cast<std::size_t>(spec_.append);
  for (std::size_t i = 0; i < spec_.dense.size(); ++i) {
    Layer layer;
    layer.kind = Layer::Kind::Dense;
    layer.name = "dense" + std::to_string(i);
    layer.in_f = static_cast<int>(width);
    layer.out_f = spec_.dense[i];
    if (layer.out_f < 1)
      throw std::invalid_argument("network: dense" + std::to_string(i) +
                                  " has non-positive width");
    layer.w_off = add_slice(layer.name + ".w",
                            static_cast<std::size_t>(layer.out_f) * layer.in_f);
    layer.b_off = add_slice(layer.name + ".b", static_cast<std::size_t>(layer.out_f));
    trunk_.push_back(layer);
    width = static_cast<std::size_t>(layer.out_f);
  }

  feature_width_ = width;
  for (std::size_t i = 0; i < spec_.heads.size(); ++i) {
    Layer layer;
    layer.kind = Layer::Kind::Dense;
    layer.relu = false;
    layer.name = "head" + std::to_string(i);
    layer.in_f = static_cast<int>(feature_width_);
    layer.out_f = spec_.heads[i];
    if (layer.out_f < 1)
      throw std::invalid_argument("network: head" + std::to_string(i) +
                                  " has non-positive width");
    layer.w_off = add_slice(layer.name + ".w",
                            static_cast<std::size_t>(layer.out_f) * layer.in_f);
    layer.b_off = add_slice(layer.name + ".b", static_cast<std::size_t>(layer.out_f));
    heads_.push_back(layer);
  }

  if (spec_.learnable_log_std)
    log_std_offset_ = add_slice("log_std", static_cast<std::size_t>(spec_.heads[0]));
  param_count_ = offset;
}

Parameters Network::init_params(std::uint64_t seed) const {
  Parameters params;
  params.values.assign(param_count_, 0.0f);
  params.slices = slices_;
  Rng rng(seed);

  auto he_uniform = [&](std::size_t offset, std::size_t size, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < size; ++i)
      params.values[offset + i] = static_cast<float>(rng.uniform(-limit, limit));
  };

  for (const Layer& layer : trunk_) {
    const std::size_t fan_in =
        layer.kind == Layer::Kind::Conv
            ? static_cast<std::size_t>(layer.in_c) * layer.kernel * layer.kernel
            : static_cast<std::size_t>(layer.in_f);
    const std::size_t w_size =
        layer.kind == Layer::Kind::Conv
            ? static_cast<std::size_t>(layer.out_c) * layer.in_c * layer.kernel *
                  layer.kernel
            : static_cast<std::size_t>(layer.out_f) * layer.in_f;
    he_uniform(layer.w_off, w_size, fan_in);
  }
  for (const Layer& layer : heads_)
    he_uniform(layer.w_off, static_cast<std::size_t>(layer.out_f) * layer.in_f,
               static_cast<std::size_t>(layer.in_f));
  if (spec_.learnable_log_std)
    for (int i = 0; i < spec_.heads[0]; ++i)
      params.values[log_std_offset_ + i] = spec_.log_std_init;
  return params;
}

namespace {

void conv_forward(int N, const float* in, float* out, const float* w, const float* b,
                  int Ci, int Hi, int Wi, int Co, int Ho, int Wo, int K, int S, int P,
                  bool relu, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
  for (int n = 0; n < N; ++n) {
    const float* xin = in + static_cast<std::size_t>(n) * Ci * Hi * Wi;
    float* xout = out + static_cast<std::size_t>(n) * Co * Ho * Wo;
    for (int oc = 0; oc < Co; ++oc) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = b[oc];
          for (int ic = 0; ic < Ci; ++ic) {
            const float* plane = xin + static_cast<std::size_t>(ic) * Hi * Wi;
            const float* kernel = w + (static_cast<std::size_t>(oc) * Ci + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
              const int iy = oy * S - P + ky;
              if (iy < 0 || iy >= Hi) continue;
              for (int kx = 0; kx < K; ++kx) {
                const int ix = ox * S - P + kx;
                if (ix < 0 || ix >= Wi) continue;
                acc += static_cast<double>(kernel[ky * K + kx]) * plane[iy * Wi + ix];
              }
            }
          }
          const float value = static_cast<float>(acc);
          xout[(static_cast<std::size_t>(oc) * Ho + oy) * Wo + ox] =
              relu && value < 0.0f ? 0.0f : value;
        }
      }
    }
  }
}

// Dense layer over a two-part input row [in1 | in2]; in2 may be null.
void dense_forward(int N, const float* in1, int f1, const float* in2, int f2,
                   float* out, const float* w, const float* b, int O, bool relu,
                   bool parallel) {
  const int F = f1 + f2;
#pragma omp parallel for schedule(static) if (parallel)
  for (int n = 0; n < N; ++n) {
    const float* x1 = in1 + static_cast<std::size_t>(n) * f1;
    const float* x2 = in2 ? in2 + static_cast<std::size_t>(n) * f2 : nullptr;
    float* y = out + static_cast<std::size_t>(n) * O;
    for (int o = 0; o < O; ++o) {
      const float* row = w + static_cast<std::size_t>(o) * F;
      double acc = b[o];
      for (int f = 0; f < f1; ++f) acc += static_cast<double>(row[f]) * x1[f];
      for (int f = 0; f < f2; ++f) acc += static_cast<double>(row[f1 + f]) * x2[f];
      const float value = static_cast<float>(acc);
      y[o] = relu && value < 0.0f ? 0.0f : value;
    }
  }
}

void relu_mask(int N, std::size_t width, const float* out, float* dout) {
  const std::size_t total = static_cast<std::size_t>(N) * width;
  for (std::size_t i = 0; i < total; ++i)
    if (out[i] <= 0.0f) dout[i] = 0.0f;
}

// Weight/bias gradients are reduced one output channel per task with samples
// visited in a fixed order, so the result is independent of the thread count.
void conv_backward(int N, const float* in, const float* dout, float* din,
                   const float* w, float* dw, float* db, int Ci, int Hi, int Wi,
                   int Co, int Ho, int Wo, int K, int S, int P, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
  for (int oc = 0; oc < Co; ++oc) {
    double bias_acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const float* xin = in + static_cast<std::size_t>(n) * Ci * Hi * Wi;
      const float* gout = dout + static_cast<std::size_t>(n) * Co * Ho * Wo +
                          static_cast<std::size_t>(oc) * Ho * Wo;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          const double g = gout[oy * Wo + ox];
          if (g == 0.0) continue;
          bias_acc += g;
          for (int ic = 0; ic < Ci; ++ic) {
            const float* plane = xin + static_cast<std::size_t>(ic) * Hi * Wi;
            float* kernel_grad = dw + (static_cast<std::size_t>(oc) * Ci + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
              const int iy = oy * S - P + ky;
              if (iy < 0 || iy >= Hi) continue;
              for (int kx = 0; kx < K; ++kx) {
                const int ix = ox * S - P + kx;
                if (ix < 0 || ix >= Wi) continue;
                kernel_grad[ky * K + kx] += static_cast<float>(g * plane[iy * Wi + ix]);
              }
            }
          }
        }
      }
    }
    db[oc] += static_cast<float>(bias_acc);
  }

  if (!din) return;
#pragma omp parallel for schedule(static) if (parallel)
  for (int n = 0; n < N; ++n) {
    float* gin = din + static_cast<std::size_t>(n) * Ci * Hi * Wi;
    const float* gout = dout + static_cast<std::size_t>(n) * Co * Ho * Wo;
    for (int oc = 0; oc < Co; ++oc) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          const double g = gout[(static_cast<std::size_t>(oc) * Ho + oy) * Wo + ox];
          if (g == 0.0) continue;
          for (int ic = 0; ic < Ci; ++ic) {
            float* plane = gin + static_cast<std::size_t>(ic) * Hi * Wi;
            const float* kernel = w + (static_cast<std::size_t>(oc) * Ci + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
              const int iy = oy * S - P + ky;
              if (iy < 0 || iy >= Hi) continue;
              for (int kx = 0; kx < K; ++kx) {
                const int ix = ox * S - P + kx;
                if (ix < 0 || ix >= Wi) continue;
                plane[iy * Wi + ix] += static_cast<float>(g * kernel[ky * K + kx]);
              }
            }
          }
        }
      }
    }
  }
}

void dense_backward(int N, const float* in1, int f1, const float* in2, int f2,
                    const float* dout, float* din1, const float* w, float* dw,
                    float* db, int O, bool parallel) {
  const int F = f1 + f2;
#pragma omp parallel for schedule(static) if (parallel)
  for (int o = 0; o < O; ++o) {
    double bias_acc = 0.0;
    float* wrow = dw + static_cast<std::size_t>(o) * F;
    for (int n = 0; n < N; ++n) {
      const double g = dout[static_cast<std::size_t>(n) * O + o];
      if (g == 0.0) continue;
      bias_acc += g;
      const float* x1 = in1 + static_cast<std::size_t>(n) * f1;
      for (int f = 0; f < f1; ++f) wrow[f] += static_cast<float>(g * x1[f]);
      if (in2) {
        const float* x2 = in2 + static_cast<std::size_t>(n) * f2;
        for (int f = 0; f < f2; ++f) wrow[f1 + f] += static_cast<float>(g * x2[f]);
      }
    }
    db[o] += static_cast<float>(bias_acc);
  }

  if (!din1) return;
#pragma omp parallel for schedule(static) if (parallel)
  for (int n = 0; n < N; ++n) {
    const float* g = dout + static_cast<std::size_t>(n) * O;
    float* gx = din1 + static_cast<std::size_t>(n) * f1;
    for (int o = 0; o < O; ++o) {
      if (g[o] == 0.0f) continue;
      const float* row = w + static_cast<std::size_t>(o) * F;
      for (int f = 0; f < f1; ++f)
        gx[f] += static_cast<float>(static_cast<double>(g[o]) * row[f]);
    }
  }
}

}  // namespace

std::vector<Tensor> Network::forward(const Parameters& params, const Tensor& input,
                                     const Tensor* append, Cache* cache,
                                     bool parallel) const {
  if (params.size() != param_count_)
    throw std::invalid_argument("forward: parameter size mismatch");
  const int N = input.batch();
  if (N < 1) throw std::invalid_argument("forward: empty batch");
  const std::size_t want_row =
      static_cast<std::size_t>(spec_.in_c) * spec_.in_h * spec_.in_w;
  if (input.row_size() != want_row)
    throw std::invalid_argument("forward: input row size mismatch at network input");
  if (spec_.append > 0 &&
      (!append || append->batch() != N ||
       append->row_size() != static_cast<std::size_t>(spec_.append)))
    throw std::invalid_argument("forward: append block missing or mis-shaped");

  std::vector<Tensor> acts_local;
  std::vector<Tensor>& acts = cache ? cache->activations : acts_local;
  acts.clear();
  acts.reserve(trunk_.size());
  if (cache) {
    cache->input = input;
    if (spec_.append > 0) cache->append = *append;
  }

  const float* src = input.data.data();
  const std::size_t n_conv = spec_.conv.size();
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    const Layer& L = trunk_[i];
    if (L.kind == Layer::Kind::Conv) {
      Tensor out({N, L.out_c, L.out_h, L.out_w});
      conv_forward(N, src, out.data.data(), params.values.data() + L.w_off,
                   params.values.data() + L.b_off, L.in_c, L.in_h, L.in_w, L.out_c,
                   L.out_h, L.out_w, L.kernel, L.stride, L.pad, L.relu, parallel);
      acts.push_back(std::move(out));
    } else {
      const bool first_dense = i == n_conv;
      const float* in2 =
          first_dense && spec_.append > 0 ? append->data.data() : nullptr;
      const int f2 = first_dense && spec_.append > 0 ? spec_.append : 0;
      const int f1 = L.in_f - f2;
      Tensor out({N, L.out_f});
      dense_forward(N, src, f1, in2, f2, out.data.data(),
                    params.values.data() + L.w_off, params.values.data() + L.b_off,
                    L.out_f, L.relu, parallel);
      acts.push_back(std::move(out));
    }
    src = acts.back().data.data();
  }

  const int ffeat = static_cast<int>(feature_width_);
  std::vector<Tensor> outputs;
  outputs.reserve(heads_.size());
  for (const Layer& H : heads_) {
    Tensor out({N, H.out_f});
    dense_forward(N, src, ffeat, nullptr, 0, out.data.data(),
                  params.values.data() + H.w_off, params.values.data() + H.b_off,
                  H.out_f, false, parallel);
    outputs.push_back(std::move(out));
  }
  return outputs;
}

const Tensor& Network::features(const Cache& cache) const {
  if (cache.activations.empty())
    throw std::logic_error("features: cache has no activations");
  return cache.activations.back();
}

void Network::backward(const Parameters& params, const Cache& cache,
                       const std::vector<Tensor>& head_grads, std::vector<float>& grad,
                       bool parallel) const {
  if (grad.size() != param_count_)
    throw std::invalid_argument("backward: gradient size mismatch");
  if (head_grads.size() != heads_.size())
    throw std::invalid_argument("backward: head gradient count mismatch");
  const int N = cache.input.batch();

  Tensor dfeature({N, static_cast<int>(feature_width_)});
  const float* feature = cache.activations.back().data.data();
  for (std::size_t hi = 0; hi < heads_.size(); ++hi) {
    const Layer& H = heads_[hi];
    dense_backward(N, feature, H.in_f, nullptr, 0, head_grads[hi].data.data(),
                   dfeature.data.data(), params.values.data() + H.w_off,
                   grad.data() + H.w_off, grad.data() + H.b_off, H.out_f, parallel);
  }

  Tensor dcur = std::move(dfeature);
  const std::size_t n_conv = spec_.conv.size();
  for (std::size_t ri = trunk_.size(); ri-- > 0;) {
    const Layer& L = trunk_[ri];
    const bool first = ri == 0;
    const Tensor& layer_in = first ? cache.input : cache.activations[ri - 1];
    const Tensor& layer_out = cache.activations[ri];

    if (L.relu)
      relu_mask(N, layer_out.row_size(), layer_out.data.data(), dcur.data.data());

    if (L.kind == Layer::Kind::Dense) {
      const bool first_dense = ri == n_conv;
      const float* in2 =
          first_dense && spec_.append > 0 ? cache.append.data.data() : nullptr;
      const int f2 = first_dense && spec_.append > 0 ? spec_.append : 0;
      const int f1 = L.in_f - f2;
      Tensor dprev({N, f1});
      dense_backward(N, layer_in.data.data(), f1, in2, f2, dcur.data.data(),
                     first ? nullptr : dprev.data.data(),
                     params.values.data() + L.w_off, grad.data() + L.w_off,
                     grad.data() + L.b_off, L.out_f, parallel);
      dcur = std::move(dprev);
    } else {
      Tensor dprev;
      if (!first) dprev = Tensor({N, L.in_c, L.in_h, L.in_w});
      conv_backward(N, layer_in.data.data(), dcur.data.data(),
                    first ? nullptr : dprev.data.data(),
                    params.values.data() + L.w_off, grad.data() + L.w_off,
                    grad.data() + L.b_off, L.in_c, L.in_h, L.in_w, L.out_c, L.out_h,
                    L.out_w, L.kernel, L.stride, L.pad, parallel);
      dcur = std::move(dprev);
    }
  }
}

// ---- gaussian policy head ---------------------------------------------------

float clamp_log_std(float log_std) {
  return std::clamp(log_std, kLogStdMin, kLogStdMax);
}

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr float kAtanhClamp = 1.0f - 1e-6f;
}  // namespace

void presquash_of_action(std::span<const float> action, std::span<float> presquash) {
  for (std::size_t i = 0; i < action.size(); ++i) {
    const float a = std::clamp(action[i], -kAtanhClamp, kAtanhClamp);
    presquash[i] = std::atanh(a);
  }
}

double squashed_log_prob(std::span<const float> mean, std::span<const float> log_std,
                         std::span<const float> presquash,
                         std::span<const float> action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double ls = clamp_log_std(log_std[i]);
    const double sigma = std::exp(ls);
    const double z = (static_cast<double>(presquash[i]) - mean[i]) / sigma;
    lp += -0.5 * (z * z + kLogTwoPi) - ls;
    const double a = std::clamp(static_cast<double>(action[i]),
                                -static_cast<double>(kAtanhClamp),
                                static_cast<double>(kAtanhClamp));
    lp -= std::log1p(-a * a);
  }
  return lp;
}

double squashed_log_prob_from_action(std::span<const float> mean,
                                     std::span<const float> log_std,
                                     std::span<const float> action) {
  std::vector<float> presquash(action.size());
  presquash_of_action(action, presquash);
  return squashed_log_prob(mean, log_std, presquash, action);
}

void sample_squashed(std::span<const float> mean, std::span<const float> log_std,
                     Rng& rng, std::span<float> presquash, std::span<float> action) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const float sigma = std::exp(clamp_log_std(log_std[i]));
    const float u = mean[i] + sigma * rng.normal_f();
    presquash[i] = u;
    // float tanh saturates to exactly 1 for large u; keep actions strictly
    // inside (-1, 1) so the inverse stays finite
    action[i] = std::clamp(std::tanh(u), -kAtanhClamp, kAtanhClamp);
  }
}

void squashed_log_prob_grad(std::span<const float> mean, std::span<const float> log_std,
                            std::span<const float> presquash, std::span<float> d_mean,
                            std::span<float> d_log_std) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double ls = clamp_log_std(log_std[i]);
    const double inv_var = std::exp(-2.0 * ls);
    const double diff = static_cast<double>(presquash[i]) - mean[i];
    d_mean[i] = static_cast<float>(diff * inv_var);
    // no gradient once the clamp is active
    const bool clamped = log_std[i] < kLogStdMin || log_std[i] > kLogStdMax;
    d_log_std[i] = clamped ? 0.0f : static_cast<float>(diff * diff * inv_var - 1.0);
  }
}

double gaussian_entropy(std::span<const float> log_std) {
  double h = 0.0;
  for (float ls : log_std) h += 0.5 * (1.0 + kLogTwoPi) + clamp_log_std(ls);
  return h;
}

// ---- adam -------------------------------------------------------------------

bool adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (float g : grads)
    if (!std::isfinite(g)) return false;

  state.t += 1;
  const double correction1 = 1.0 - std::pow(static_cast<double>(config.beta1), state.t);
  const double correction2 = 1.0 - std::pow(static_cast<double>(config.beta2), state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    const double v = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    params[i] -= static_cast<float>(config.lr * (m / correction1) /
                                    (std::sqrt(v / correction2) + config.eps));
  }
  return true;
}

// ---- checkpoints ------------------------------------------------------------

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << "SCOPENET 1\n";
  out << "spec " << ckpt.spec.to_string() << "\n";
  out << "seed " << ckpt.seed << "\n";
  out << "steps " << ckpt.steps << "\n";
  out << "slices " << ckpt.params.slices.size() << "\n";
  for (const ParamSlice& s : ckpt.params.slices)
    out << "slice " << s.name << " " << s.offset << " " << s.size << "\n";
  out << "end_header\n";
  out.write(reinterpret_cast<const char*>(ckpt.params.values.data()),
            static_cast<std::streamsize>(ckpt.params.values.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "SCOPENET 1")
    throw std::runtime_error(path + ": not a SCOPENET 1 file");

  Checkpoint ckpt;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      header_done = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "spec") {
      std::string rest;
      ls >> rest;
      ckpt.spec = NetworkSpec::from_string(rest);
    } else if (key == "seed") {
      ls >> ckpt.seed;
    } else if (key == "steps") {
      ls >> ckpt.steps;
    } else if (key == "slices") {
      // slice count is implied by the slice lines
    } else if (key == "slice") {
      ParamSlice s;
      ls >> s.name >> s.offset >> s.size;
      ckpt.params.slices.push_back(s);
    } else {
      throw std::runtime_error(path + ": unknown checkpoint header key '" + key + "'");
    }
  }
  if (!header_done) throw std::runtime_error(path + ": missing end_header");

  std::size_t total = 0;
  for (const ParamSlice& s : ckpt.params.slices)
    total = std::max(total, s.offset + s.size);
  ckpt.params.values.resize(total);
  in.read(reinterpret_cast<char*>(ckpt.params.values.data()),
          static_cast<std::streamsize>(total * sizeof(float)));
  if (!in) throw std::runtime_error(path + ": truncated parameter blob");
  return ckpt;
}

}  // namespace scopesim
