#include "scopesim/geometry.hpp"

#include <algorithm>

namespace scopesim {

namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

Pose euler_to_pose(const EulerPose& e) {
  const double ca = std::cos(e.alpha), sa = std::sin(e.alpha);
  const double cb = std::cos(e.beta), sb = std::sin(e.beta);
  const double cg = std::cos(e.gamma), sg = std::sin(e.gamma);

  // R = Rx(alpha) * Ry(beta) * Rz(gamma), intrinsic X-Y-Z order.
  Pose p;
  p.rotation(0, 0) = cb * cg;
  p.rotation(0, 1) = -cb * sg;
  p.rotation(0, 2) = sb;
  p.rotation(1, 0) = ca * sg + sa * sb * cg;
  p.rotation(1, 1) = ca * cg - sa * sb * sg;
  p.rotation(1, 2) = -sa * cb;
  p.rotation(2, 0) = sa * sg - ca * sb * cg;
  p.rotation(2, 1) = sa * cg + ca * sb * sg;
  p.rotation(2, 2) = ca * cb;
  p.translation = {e.x, e.y, e.z};
  return p;
}

EulerPose pose_to_euler(const Pose& p) {
  const Mat3& r = p.rotation;
  EulerPose e;
  e.x = p.translation.x;
  e.y = p.translation.y;
  e.z = p.translation.z;

  const double sb = clamp_unit(r(0, 2));
  e.beta = std::asin(sb);
  if (std::abs(sb) > 1.0 - 1e-12) {
    // Gimbal lock: alpha and gamma are coupled; put the residual in alpha.
    e.alpha = std::atan2(r(2, 1), r(1, 1));
    e.gamma = 0.0;
  } else {
    e.alpha = std::atan2(-r(1, 2), r(2, 2));
    e.gamma = std::atan2(-r(0, 1), r(0, 0));
  }
  return e;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transposed();
  out.translation = out.rotation * (Vec3{} - p.translation);
  return out;
}

Action relative_action(const Pose& current, const Pose& next) {
  const Pose rel = compose(inverse(current), next);
  const EulerPose e = pose_to_euler(rel);
  return Action{e.x, e.y, e.z, e.alpha, e.beta, e.gamma};
}

Pose action_to_pose(const Action& a) {
  return euler_to_pose(EulerPose{a.dx, a.dy, a.dz, a.dalpha, a.dbeta, a.dgamma});
}

double rotation_geodesic(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a * b.transposed();
  return std::acos(clamp_unit((rel.trace() - 1.0) / 2.0));
}

Mat3 axis_angle_rotation(const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  Mat3 r;
  r(0, 0) = t * x * x + c;
  r(0, 1) = t * x * y - s * z;
  r(0, 2) = t * x * z + s * y;
  r(1, 0) = t * x * y + s * z;
  r(1, 1) = t * y * y + c;
  r(1, 2) = t * y * z - s * x;
  r(2, 0) = t * x * z - s * y;
  r(2, 1) = t * y * z + s * x;
  r(2, 2) = t * z * z + c;
  return r;
}

std::pair<Vec3, double> rotation_axis_angle(const Mat3& r) {
  const double angle = std::acos(clamp_unit((r.trace() - 1.0) / 2.0));
  if (angle < 1e-12) return {Vec3{1, 0, 0}, 0.0};
  if (angle > kPi - 1e-6) {
    // near pi the skew part vanishes; recover the axis from the diagonal
    Vec3 axis{std::sqrt(std::max(0.0, (r(0, 0) + 1.0) / 2.0)),
              std::sqrt(std::max(0.0, (r(1, 1) + 1.0) / 2.0)),
              std::sqrt(std::max(0.0, (r(2, 2) + 1.0) / 2.0))};
    if (r(0, 1) + r(1, 0) < 0) axis.y = -axis.y;
    if (r(0, 2) + r(2, 0) < 0) axis.z = -axis.z;
    return {normalized(axis), angle};
  }
  const double scale = 1.0 / (2.0 * std::sin(angle));
  const Vec3 axis{(r(2, 1) - r(1, 2)) * scale, (r(0, 2) - r(2, 0)) * scale,
                  (r(1, 0) - r(0, 1)) * scale};
  return {normalized(axis), angle};
}

Mat3 rotate_towards(const Mat3& from, const Mat3& to, double max_angle) {
  const Mat3 rel = from.transposed() * to;
  const auto [axis, angle] = rotation_axis_angle(rel);
  if (angle <= max_angle) return to;
  return from * axis_angle_rotation(axis, max_angle);
}

std::array<double, 6> normalize_action(const Action& a, const ActionLimits& limits) {
  std::array<double, 6> out{};
  for (int i = 0; i < 3; ++i) out[i] = clamp_unit(a.channel(i) / limits.pos_mm);
  for (int i = 3; i < 6; ++i) out[i] = clamp_unit(a.channel(i) / limits.rot_rad);
  return out;
}

Action denormalize_action(const std::array<double, 6>& n, const ActionLimits& limits) {
  Action a;
  a.dx = clamp_unit(n[0]) * limits.pos_mm;
  a.dy = clamp_unit(n[1]) * limits.pos_mm;
  a.dz = clamp_unit(n[2]) * limits.pos_mm;
  a.dalpha = clamp_unit(n[3]) * limits.rot_rad;
  a.dbeta = clamp_unit(n[4]) * limits.rot_rad;
  a.dgamma = clamp_unit(n[5]) * limits.rot_rad;
  return a;
}

bool is_orthonormal(const Mat3& r, double tol) {
  const Mat3 gram = r * r.transposed();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(gram(i, j) - want) > tol) return false;
    }
  const double det =
      r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
      r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
      r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  return std::abs(det - 1.0) <= tol;
}

}  // namespace scopesim
