#pragma once

#include <array>
#include <cmath>

namespace refpts {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Point3&) const = default;
};

/// Ground-plane velocity, meters/second.
struct Velocity2 {
  double vx = 0.0;
  double vy = 0.0;
  bool operator==(const Velocity2&) const = default;
};

/// Axis-aligned box extents, meters. Components strictly positive when meaningful.
struct Size3 {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  bool operator==(const Size3&) const = default;
};

bool is_finite(const Point3& p);
bool is_finite(const Velocity2& v);
bool is_finite(const Size3& s);

/// Row-major 3x3 matrix. Default-constructed as identity.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  static Mat3 identity() { return Mat3{}; }
  bool operator==(const Mat3&) const = default;
};

Mat3 operator*(const Mat3& a, const Mat3& b);
Mat3 operator+(const Mat3& a, const Mat3& b);
Mat3 operator*(double s, const Mat3& a);
Point3 operator*(const Mat3& a, const Point3& p);
Mat3 transpose(const Mat3& a);
double determinant(const Mat3& a);
/// Inverse via adjugate; throws std::invalid_argument on a singular matrix.
Mat3 inverse(const Mat3& a);
/// Max-norm of R^T R - I.
double orthonormality_error(const Mat3& r);

/// Rigid transform: p_out = R * p_in + t.
///
/// Construction validates R in SO(3). Inputs within kRepairTolerance of
/// orthonormal are re-orthonormalized via polar decomposition (calibration
/// matrices arrive with float noise); anything worse, or an improper rotation
/// (det <= 0), throws std::invalid_argument. Instances are immutable values.
class TransformSE3 {
 public:
  static constexpr double kOrthonormalTolerance = 1e-9;
  static constexpr double kRepairTolerance = 1e-3;

  TransformSE3() = default;  // identity
  TransformSE3(const Mat3& rotation, const Point3& translation);

  static TransformSE3 identity() { return TransformSE3{}; }
  static TransformSE3 from_yaw(double yaw, const Point3& translation = {});
  static TransformSE3 from_axis_angle(const Point3& axis, double angle,
                                      const Point3& translation = {});

  const Mat3& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }

  bool operator==(const TransformSE3&) const = default;

 private:
  Mat3 rotation_{};
  Point3 translation_{};
};

/// R * p + t.
Point3 transform_point(const TransformSE3& t, const Point3& p);

/// Ground-plane projection of R applied to (vx, vy, 0). Velocities are
/// direction vectors: the translation is never applied, and relative motion
/// between the two frames is not compensated.
Velocity2 transform_velocity(const TransformSE3& t, const Velocity2& v);

/// compose(a, b) applies b first, then a.
TransformSE3 compose(const TransformSE3& a, const TransformSE3& b);

/// Rotation R^T, translation -R^T t.
TransformSE3 inverse(const TransformSE3& t);

double distance(const Point3& a, const Point3& b);
double planar_distance(const Point3& a, const Point3& b);

inline double norm(const Velocity2& v) { return std::hypot(v.vx, v.vy); }

}  // namespace refpts
