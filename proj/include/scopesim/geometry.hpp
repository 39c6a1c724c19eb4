#pragma once

#include <array>
#include <cmath>

namespace scopesim {

constexpr double kPi = 3.14159265358979323846;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Mat3 operator*(const Mat3& o) const {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        out(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) +
                    (*this)(r, 2) * o(2, c);
    return out;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 transposed() const {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
    return out;
  }

  double trace() const { return m[0] + m[4] + m[8]; }
};

/// Rigid camera pose: rotation plus translation in millimeters.
/// The stored transform maps camera-frame coordinates to world coordinates.
struct Pose {
  Mat3 rotation;
  Vec3 translation;

  static Pose identity() { return Pose{}; }
};

/// 6-DoF pose as (x, y, z) in mm and intrinsic X-then-Y-then-Z Euler angles
/// in radians. This convention is used everywhere: trajectory files, actions,
/// and the environment.
struct EulerPose {
  double x = 0.0, y = 0.0, z = 0.0;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;

  Vec3 position() const { return {x, y, z}; }
  double channel(int i) const {
    const double* p = &x;
    return p[i];
  }
  double& channel(int i) {
    double* p = &x;
    return p[i];
  }
};

/// Relative transform expressed in the current camera frame.
struct Action {
  double dx = 0.0, dy = 0.0, dz = 0.0;
  double dalpha = 0.0, dbeta = 0.0, dgamma = 0.0;

  double channel(int i) const {
    const double* p = &dx;
    return p[i];
  }
};

/// Physical per-component action bounds.
struct ActionLimits {
  double pos_mm = 1.5;
  double rot_rad = deg_to_rad(3.0);
};

Pose euler_to_pose(const EulerPose& e);
EulerPose pose_to_euler(const Pose& p);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Relative transform from `current` to `next`, expressed in the current
/// camera frame, so that compose(current, action_to_pose(a)) == next.
Action relative_action(const Pose& current, const Pose& next);
Pose action_to_pose(const Action& a);

/// Rotation angle in [0, pi] between two orthonormal rotations.
double rotation_geodesic(const Mat3& a, const Mat3& b);

/// Rodrigues rotation about a unit axis.
Mat3 axis_angle_rotation(const Vec3& axis, double angle);

/// Axis and angle (in [0, pi]) of a rotation; the axis is arbitrary for the
/// identity.
std::pair<Vec3, double> rotation_axis_angle(const Mat3& r);

/// Rotate `from` toward `to` by at most max_angle radians along the geodesic.
Mat3 rotate_towards(const Mat3& from, const Mat3& to, double max_angle);

/// Componentwise scaling into [-1, 1] (clamped) and back.
std::array<double, 6> normalize_action(const Action& a, const ActionLimits& limits);
Action denormalize_action(const std::array<double, 6>& n, const ActionLimits& limits);

/// True when R^T R = I and det(R) = 1 within tol.
bool is_orthonormal(const Mat3& r, double tol = 1e-9);

}  // namespace scopesim
