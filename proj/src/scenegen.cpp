#include "scopesim/scenegen.hpp"

#include <cmath>

namespace scopesim {

namespace {

constexpr double kDomeHalfAngle = deg_to_rad(80.0);

double hash_noise(std::int64_t ix, std::int64_t iy, std::int64_t iz,
                  std::uint64_t seed) {
  std::uint64_t h = seed;
  h ^= static_cast<std::uint64_t>(ix) * 0x8da6b343u;
  h ^= static_cast<std::uint64_t>(iy) * 0xd8163841u;
  h ^= static_cast<std::uint64_t>(iz) * 0xcb1ab31fu;
  const std::uint64_t v = splitmix64(h);
  return static_cast<double>(v >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

/// Trilinearly interpolated lattice value noise in roughly [-1, 1].
double value_noise(const Vec3& p, std::uint64_t seed) {
  const double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = smoothstep(p.x - fx);
  const double ty = smoothstep(p.y - fy);
  const double tz = smoothstep(p.z - fz);

  double corners[2][2][2];
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz)
        corners[dx][dy][dz] = hash_noise(ix + dx, iy + dy, iz + dz, seed);

  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double x00 = lerp(corners[0][0][0], corners[1][0][0], tx);
  const double x10 = lerp(corners[0][1][0], corners[1][1][0], tx);
  const double x01 = lerp(corners[0][0][1], corners[1][0][1], tx);
  const double x11 = lerp(corners[0][1][1], corners[1][1][1], tx);
  const double y0 = lerp(x00, x10, ty);
  const double y1 = lerp(x01, x11, ty);
  return lerp(y0, y1, tz);
}

double fbm(const Vec3& p, int octaves, std::uint64_t seed) {
  double sum = 0.0, amp = 1.0, freq = 1.0, total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(p * freq, seed + static_cast<std::uint64_t>(o));
    total += amp;
    amp *= 0.5;
    freq *= 2.03;
  }
  return sum / total;
}

Vec3 dome_direction(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
          std::cos(theta)};
}

double angular_distance(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

GeneratedScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.point_count < 1000)
    throw std::invalid_argument("generate_scene: point_count must be >= 1000");
  if (spec.cavity_radius_min_mm <= 0 ||
      spec.cavity_radius_max_mm < spec.cavity_radius_min_mm)
    throw std::invalid_argument("generate_scene: invalid radius range");

  Rng rng(seed);
  GeneratedScene out;
  out.base_radius_mm = rng.uniform(spec.cavity_radius_min_mm, spec.cavity_radius_max_mm);
  const double radius = out.base_radius_mm;
  const std::uint64_t shape_seed = rng.next_u64();
  const std::uint64_t color_seed = rng.next_u64();

  auto surface_radius = [&](const Vec3& dir) {
    return radius * (1.0 + 0.12 * fbm(dir * 2.0, 3, shape_seed));
  };

  // Landmark directions on the dome; landmark 0 is placed where goals can
  // frame it from inside the cavity.
  struct Blob {
    Vec3 dir;
    double angular_radius;
  };
  std::vector<Blob> blobs;
  const int count = std::max(1, spec.landmark_count);
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double theta = i == 0 ? rng.uniform(deg_to_rad(20.0), deg_to_rad(40.0))
                                  : rng.uniform(deg_to_rad(10.0), deg_to_rad(65.0));
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      const Blob candidate{dome_direction(theta, phi),
                           rng.uniform(deg_to_rad(6.0), deg_to_rad(9.0))};
      bool overlaps = false;
      for (const Blob& other : blobs)
        if (angular_distance(candidate.dir, other.dir) <
            1.5 * (candidate.angular_radius + other.angular_radius))
          overlaps = true;
      if (!overlaps) {
        blobs.push_back(candidate);
        break;
      }
    }
  }
  for (const Blob& b : blobs)
    out.landmarks.push_back(b.dir * surface_radius(b.dir));

  out.cloud.positions.reserve(spec.point_count * 3);
  out.cloud.colors.reserve(spec.point_count * 3);
  const double cos_max = std::cos(kDomeHalfAngle);
  for (std::size_t i = 0; i < spec.point_count; ++i) {
    // Uniform over the dome cap's solid angle.
    const double cos_theta = 1.0 - rng.uniform() * (1.0 - cos_max);
    const double theta = std::acos(cos_theta);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const Vec3 dir = dome_direction(theta, phi);
    const Vec3 p = dir * surface_radius(dir);

    const Vec3 tex = dir * spec.texture_scale;
    double r = 0.58 + 0.22 * fbm(tex, 4, color_seed);
    double g = 0.24 + 0.10 * fbm(tex + Vec3{7.3, 1.1, 4.9}, 4, color_seed);
    double b = 0.26 + 0.10 * fbm(tex + Vec3{2.9, 8.7, 6.1}, 4, color_seed);

    for (std::size_t bi = 0; bi < blobs.size(); ++bi) {
      const double ang = angular_distance(dir, blobs[bi].dir);
      if (ang > blobs[bi].angular_radius) continue;
      const double blend = smoothstep(1.0 - ang / blobs[bi].angular_radius);
      if (bi == 0) {
        // Bright target marker.
        r += blend * (0.97 - r);
        g += blend * (0.92 - g);
        b += blend * (0.70 - b);
      } else {
        r += blend * (0.30 - r);
        g += blend * (0.12 - g);
        b += blend * (0.16 - b);
      }
    }
    out.cloud.add_point(p, clamp01(r), clamp01(g), clamp01(b));
  }
  return out;
}

Pose look_at_pose(const Vec3& eye, const Vec3& target) {
  const Vec3 z = normalized(target - eye);
  Vec3 up_hint{0.0, 1.0, 0.0};
  if (std::abs(dot(up_hint, z)) > 0.99) up_hint = Vec3{1.0, 0.0, 0.0};
  const Vec3 y = normalized(up_hint - z * dot(up_hint, z));
  const Vec3 x = cross(y, z);

  Pose p;
  for (int r = 0; r < 3; ++r) {
    const double* cols[3] = {&x.x, &y.x, &z.x};
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = cols[c][r];
  }
  p.translation = eye;
  return p;
}

GeneratedDemo generate_demonstration(const GeneratedScene& scene, const DemoSpec& spec,
                                     const CameraIntrinsics& check_intrinsics,
                                     std::uint64_t seed) {
  if (scene.landmarks.empty())
    throw GenerationError("generate_demonstration: scene has no landmarks");
  Rng rng(seed);
  const Vec3 landmark = scene.landmarks.front();
  // Canonical viewpoint: fronto-parallel view of the target from the cavity
  // interior. All demonstrations of a scene converge to (nearly) this pose,
  // so the expert motion is a function of the observable state rather than
  // of each clip's private start.
  const Vec3 radial = normalized(Vec3{} - landmark);

  for (int attempt = 0; attempt < spec.retry_budget; ++attempt) {
    const Vec3 interior{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                        rng.uniform(-0.5, 0.5)};
    const double goal_dist =
        spec.goal_distance_mm +
        rng.uniform(-spec.goal_distance_jitter_mm, spec.goal_distance_jitter_mm);
    const Vec3 goal_pos =
        landmark + normalized(radial * goal_dist + interior) * goal_dist;
    const Pose goal = look_at_pose(goal_pos, landmark);

    // Start: retracted by the path length, mostly behind the goal.
    const double path_len =
        rng.uniform(spec.path_length_min_mm, spec.path_length_max_mm);
    Vec3 start_pos;
    bool placed = false;
    for (int inner = 0; inner < 50; ++inner) {
      const double u = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      const Vec3 dir{s * std::cos(phi), s * std::sin(phi), u};
      const Vec3 candidate = goal_pos + dir * path_len;
      if (norm(candidate) > 0.70 * scene.base_radius_mm) continue;
      if (norm(candidate - landmark) < goal_dist + 0.5 * path_len) continue;
      start_pos = candidate;
      placed = true;
      break;
    }
    if (!placed) continue;

    // The start view misses the landmark by a sampled aim error, applied as
    // an orthogonal displacement of the look-at target.
    const Vec3 view = normalized(landmark - start_pos);
    Vec3 basis1 = cross(view, std::abs(view.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0});
    basis1 = normalized(basis1);
    const Vec3 basis2 = cross(view, basis1);
    const double aim = rng.uniform(spec.aim_error_min_rad, spec.aim_error_max_rad);
    const double azimuth = rng.uniform(0.0, 2.0 * kPi);
    const Vec3 aim_target =
        landmark + (basis1 * std::cos(azimuth) + basis2 * std::sin(azimuth)) *
                       (norm(landmark - start_pos) * std::tan(aim));

    Pose start = look_at_pose(start_pos, aim_target);
    EulerPose start_euler = pose_to_euler(start);
    start_euler.alpha += rng.uniform(-spec.start_rot_jitter_rad, spec.start_rot_jitter_rad);
    start_euler.beta += rng.uniform(-spec.start_rot_jitter_rad, spec.start_rot_jitter_rad);
    start_euler.gamma += rng.uniform(-spec.start_rot_jitter_rad, spec.start_rot_jitter_rad);
    start = euler_to_pose(start_euler);

    // Check the goal actually frames the landmark centrally at a usable depth.
    const Mat3 w2c = goal.rotation.transposed();
    const Vec3 cam = w2c * (landmark - goal.translation);
    if (cam.z < 15.0 || cam.z > 35.0) continue;
    const double u = check_intrinsics.fx * cam.x / cam.z + check_intrinsics.cx;
    const double v = check_intrinsics.fy * cam.y / cam.z + check_intrinsics.cy;
    if (std::abs(u - check_intrinsics.cx) > 0.10 * check_intrinsics.width ||
        std::abs(v - check_intrinsics.cy) > 0.10 * check_intrinsics.height)
      continue;

    // Servo integration: advance straight toward the goal point while
    // re-aiming at the landmark at a bounded angular rate, ending exactly at
    // the goal pose. The expert action at any pose depends only on that pose
    // and the scene, so demonstrations never conflict.
    const double ds = 0.25;  // integration step, mm
    const double kappa = 0.8 * spec.rot_per_mm_cap_rad;  // rad per mm
    std::vector<Pose> polyline{start};
    Pose pose = start;
    bool diverged = false;
    for (int iter = 0;; ++iter) {
      const double remaining = norm(goal_pos - pose.translation);
      if (remaining <= ds) break;
      if (iter > 1000) {
        diverged = true;
        break;
      }
      pose.translation += normalized(goal_pos - pose.translation) * ds;
      const Mat3 target = look_at_pose(pose.translation, landmark).rotation;
      // capped-proportional re-aim: a smooth feedback law of the visible
      // offset that stays stable when imitated in closed loop
      const double offset = rotation_geodesic(pose.rotation, target);
      const double step_angle = std::min(kappa * ds, 0.08 * offset);
      pose.rotation = rotate_towards(pose.rotation, target, step_angle);
      polyline.push_back(pose);
    }
    if (diverged) continue;
    // the re-aim must have essentially completed before arrival, or the
    // appended goal pose would introduce a rotation jump
    if (rotation_geodesic(pose.rotation, goal.rotation) > deg_to_rad(2.0)) continue;
    polyline.push_back(goal);

    // Arc lengths for the minimum-jerk time profile.
    std::vector<double> arc{0.0};
    for (std::size_t i = 1; i < polyline.size(); ++i)
      arc.push_back(arc.back() +
                    norm(polyline[i].translation - polyline[i - 1].translation));
    const double total = arc.back();
    if (total < spec.path_length_min_mm * 0.5) continue;

    const int m = std::max(2, spec.sample_count);
    GeneratedDemo demo;
    demo.goal = goal;
    demo.start = start;
    demo.trajectory.points.reserve(m);
    demo.trajectory.timestamps.reserve(m);
    std::size_t cursor = 1;
    for (int i = 0; i < m; ++i) {
      const double t = static_cast<double>(i) / (m - 1);
      const double s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));  // minimum jerk
      const double target_arc = s * total;
      while (cursor + 1 < polyline.size() && arc[cursor] < target_arc) ++cursor;
      const double seg = arc[cursor] - arc[cursor - 1];
      const double frac =
          seg > 1e-12 ? std::clamp((target_arc - arc[cursor - 1]) / seg, 0.0, 1.0)
                      : 1.0;
      const EulerPose a = pose_to_euler(polyline[cursor - 1]);
      const EulerPose b = pose_to_euler(polyline[cursor]);
      EulerPose p;
      for (int ch = 0; ch < 6; ++ch)
        p.channel(ch) = a.channel(ch) + frac * (b.channel(ch) - a.channel(ch));
      for (int ch = 0; ch < 3; ++ch)
        p.channel(ch) += spec.jitter_pos_sigma_mm * rng.normal();
      for (int ch = 3; ch < 6; ++ch)
        p.channel(ch) += spec.jitter_rot_sigma_rad * rng.normal();
      demo.trajectory.points.push_back(p);
      demo.trajectory.timestamps.push_back(t * spec.duration_s);
    }
    return demo;
  }
  throw GenerationError("generate_demonstration: no valid goal placement found");
}

}  // namespace scopesim
