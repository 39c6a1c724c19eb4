// Benchmark: OpenMP kernels against their sequential reference
// implementations (renderer, batch renderer, vector env, network kernels).

#include <chrono>
#include <cstdio>
#include <functional>

#include "scopesim/env.hpp"
#include "scopesim/learn.hpp"
#include "scopesim/reference.hpp"
#include "scopesim/scenegen.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace scopesim;

namespace {

double time_ms(const std::function<void()>& body, int repeats) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) body();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void report(const char* name, double parallel_ms, double serial_ms) {
  std::printf("%-28s parallel %8.3f ms   serial %8.3f ms   speedup %.2fx\n", name,
              parallel_ms, serial_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif

  SceneSpec sspec;  // default 1e5 points
  const GeneratedScene generated = generate_scene(sspec, 1);
  const PointCloudScene& scene = generated.cloud;

  CameraIntrinsics intr;
  intr.width = 160;
  intr.height = 128;
  intr.fx = intr.fy = 175.0;
  intr.cx = 80.0;
  intr.cy = 64.0;
  const Pose pose = Pose::identity();

  report("render 1e5 pts @160x128",
         time_ms([&] { render(scene, pose, intr, 1); }, 20),
         time_ms([&] { render_reference(scene, pose, intr, 1); }, 20));

  std::vector<RenderRequest> batch(16, RenderRequest{&scene, pose});
  report("render_batch x16",
         time_ms([&] { render_batch(batch, intr, 1); }, 5),
         time_ms([&] { render_batch_reference(batch, intr, 1); }, 5));

  // policy network forward/backward at the default observation size
  const NetworkSpec spec = NetworkSpec::policy(4, 64, 80);
  Network net(spec);
  const Parameters params = net.init_params(2);
  Rng rng(3);
  Tensor input({64, spec.in_c * spec.in_h * spec.in_w});
  for (float& v : input.data) v = rng.normal_f();

  report("policy forward b=64",
         time_ms([&] { net.forward(params, input, nullptr, nullptr, true); }, 5),
         time_ms([&] { net.forward(params, input, nullptr, nullptr, false); }, 5));

  Network::Cache cache;
  net.forward(params, input, nullptr, &cache);
  std::vector<Tensor> head_grads;
  for (int width : spec.heads) {
    Tensor g({64, width});
    for (float& v : g.data) v = rng.normal_f();
    head_grads.push_back(std::move(g));
  }
  std::vector<float> grad(params.size());
  report("policy backward b=64",
         time_ms(
             [&] {
               std::fill(grad.begin(), grad.end(), 0.0f);
               net.backward(params, cache, head_grads, grad, true);
             },
             5),
         time_ms(
             [&] {
               std::fill(grad.begin(), grad.end(), 0.0f);
               net.backward(params, cache, head_grads, grad, false);
             },
             5));

  // single-row double-precision reference forward for scale
  const auto row = input.row(0);
  const std::vector<double> row_d(row.begin(), row.end());
  const double ref_ms = time_ms([&] { reference_forward(spec, params, row_d); }, 5);
  std::printf("%-28s %8.3f ms (double, one row)\n", "reference_forward", ref_ms);

  // vector env stepping
  EnvConfig config;
  config.obs_width = 80;
  config.obs_height = 64;
  auto scene_ptr = std::make_shared<const PointCloudScene>(scene);
  const GeneratedDemo demo =
      generate_demonstration(generated, DemoSpec{}, intrinsics_for(config), 4);
  const WaypointTrajectory expert =
      resample_equal_distance(smooth(demo.trajectory, 7), 1.0);
  Rng ws_rng(5);
  const Workspace ws = workspace_from_trajectory(expert, AugmentationParams{}, ws_rng);

  std::vector<SceneEnvironment> envs;
  for (int i = 0; i < 8; ++i) envs.emplace_back(scene_ptr, expert, ws, config);
  VectorEnv vec(std::move(envs));
  std::vector<std::uint64_t> seeds(8);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = 100 + i;
  const std::vector<std::array<double, 6>> actions(8, {0.1, 0, 0, 0, 0, 0});

  const double par = time_ms(
      [&] {
        vec.reset_all(seeds);
        for (int s = 0; s < 4; ++s) vec.step_all(actions);
      },
      3);
  const double ser = time_ms(
      [&] {
        vec.reset_all_serial(seeds);
        for (int s = 0; s < 4; ++s) vec.step_all_serial(actions);
      },
      3);
  report("vector env x8, 4 steps", par, ser);
  return 0;
}
