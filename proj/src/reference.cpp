#include "scopesim/reference.hpp"

#include <stdexcept>

namespace scopesim {

namespace {

std::vector<double> slice_as_double(const Parameters& params, const std::string& name) {
  const auto view = params.view(name);
  return std::vector<double>(view.begin(), view.end());
}

std::vector<double> conv_layer(const std::vector<double>& in, int Ci, int Hi, int Wi,
                               const std::vector<double>& w, const std::vector<double>& b,
                               int Co, int K, int S, int P, int& Ho, int& Wo) {
  Ho = (Hi + 2 * P - K) / S + 1;
  Wo = (Wi + 2 * P - K) / S + 1;
  std::vector<double> out(static_cast<std::size_t>(Co) * Ho * Wo, 0.0);
  for (int oc = 0; oc < Co; ++oc)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < Ci; ++ic)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
              const int iy = oy * S - P + ky;
              const int ix = ox * S - P + kx;
              if (iy < 0 || iy >= Hi || ix < 0 || ix >= Wi) continue;
              acc += w[((static_cast<std::size_t>(oc) * Ci + ic) * K + ky) * K + kx] *
                     in[(static_cast<std::size_t>(ic) * Hi + iy) * Wi + ix];
            }
        out[(static_cast<std::size_t>(oc) * Ho + oy) * Wo + ox] =
            acc > 0.0 ? acc : 0.0;  // trunk convs are always ReLU
      }
  return out;
}

std::vector<double> dense_layer(const std::vector<double>& in,
                                const std::vector<double>& w,
                                const std::vector<double>& b, int O, bool relu) {
  const std::size_t F = in.size();
  std::vector<double> out(static_cast<std::size_t>(O), 0.0);
  for (int o = 0; o < O; ++o) {
    double acc = b[o];
    for (std::size_t f = 0; f < F; ++f)
      acc += w[static_cast<std::size_t>(o) * F + f] * in[f];
    out[o] = relu && acc < 0.0 ? 0.0 : acc;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> reference_forward(const NetworkSpec& spec,
                                                   const Parameters& params,
                                                   const std::vector<double>& input_row,
                                                   const std::vector<double>& append_row) {
  if (input_row.size() !=
      static_cast<std::size_t>(spec.in_c) * spec.in_h * spec.in_w)
    throw std::invalid_argument("reference_forward: input size mismatch");
  if (append_row.size() != static_cast<std::size_t>(spec.append))
    throw std::invalid_argument("reference_forward: append size mismatch");

  std::vector<double> cur = input_row;
  int c = spec.in_c, h = spec.in_h, w = spec.in_w;
  for (std::size_t i = 0; i < spec.conv.size(); ++i) {
    const ConvSpec& cs = spec.conv[i];
    const std::string name = "conv" + std::to_string(i);
    int ho = 0, wo = 0;
    cur = conv_layer(cur, c, h, w, slice_as_double(params, name + ".w"),
                     slice_as_double(params, name + ".b"), cs.out_channels, cs.kernel,
                     cs.stride, cs.pad, ho, wo);
    c = cs.out_channels;
    h = ho;
    w = wo;
  }

  cur.insert(cur.end(), append_row.begin(), append_row.end());
  for (std::size_t i = 0; i < spec.dense.size(); ++i) {
    const std::string name = "dense" + std::to_string(i);
    cur = dense_layer(cur, slice_as_double(params, name + ".w"),
                      slice_as_double(params, name + ".b"), spec.dense[i], true);
  }

  std::vector<std::vector<double>> heads;
  for (std::size_t i = 0; i < spec.heads.size(); ++i) {
    const std::string name = "head" + std::to_string(i);
    heads.push_back(dense_layer(cur, slice_as_double(params, name + ".w"),
                                slice_as_double(params, name + ".b"), spec.heads[i],
                                false));
  }
  return heads;
}

}  // namespace scopesim
