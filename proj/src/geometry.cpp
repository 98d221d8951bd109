#include "refpts/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace refpts {

bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

bool is_finite(const Velocity2& v) {
  return std::isfinite(v.vx) && std::isfinite(v.vy);
}

bool is_finite(const Size3& s) {
  return std::isfinite(s.length) && std::isfinite(s.width) && std::isfinite(s.height);
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    }
  }
  return out;
}

Mat3 operator+(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (int i = 0; i < 9; ++i) out.m[i] = a.m[i] + b.m[i];
  return out;
}

Mat3 operator*(double s, const Mat3& a) {
  Mat3 out;
  for (int i = 0; i < 9; ++i) out.m[i] = s * a.m[i];
  return out;
}

Point3 operator*(const Mat3& a, const Point3& p) {
  return {a(0, 0) * p.x + a(0, 1) * p.y + a(0, 2) * p.z,
          a(1, 0) * p.x + a(1, 1) * p.y + a(1, 2) * p.z,
          a(2, 0) * p.x + a(2, 1) * p.y + a(2, 2) * p.z};
}

Mat3 transpose(const Mat3& a) {
  Mat3 out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out(r, c) = a(c, r);
  return out;
}

double determinant(const Mat3& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Mat3 inverse(const Mat3& a) {
  const double det = determinant(a);
  if (std::abs(det) < 1e-300) {
    throw std::invalid_argument("Mat3::inverse: singular matrix");
  }
  const double inv_det = 1.0 / det;
  Mat3 out;
  out(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) * inv_det;
  out(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) * inv_det;
  out(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) * inv_det;
  out(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) * inv_det;
  out(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) * inv_det;
  out(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) * inv_det;
  out(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) * inv_det;
  out(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) * inv_det;
  out(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) * inv_det;
  return out;
}

double orthonormality_error(const Mat3& r) {
  const Mat3 gram = transpose(r) * r;
  double err = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double target = (i == j) ? 1.0 : 0.0;
      err = std::max(err, std::abs(gram(i, j) - target));
    }
  }
  return err;
}

namespace {

// Polar factor via Newton iteration X <- (X + X^-T) / 2. Converges
// quadratically for matrices near the orthogonal group.
Mat3 polar_rotation(const Mat3& a) {
  Mat3 x = a;
  for (int iter = 0; iter < 32; ++iter) {
    const Mat3 next = 0.5 * (x + transpose(inverse(x)));
    double step = 0.0;
    for (int i = 0; i < 9; ++i) step = std::max(step, std::abs(next.m[i] - x.m[i]));
    x = next;
    if (step < 1e-15) break;
  }
  return x;
}

}  // namespace

TransformSE3::TransformSE3(const Mat3& rotation, const Point3& translation) {
  for (double v : rotation.m) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("TransformSE3: rotation has non-finite entries");
    }
  }
  if (!is_finite(translation)) {
    throw std::invalid_argument("TransformSE3: translation has non-finite entries");
  }
  const double err = orthonormality_error(rotation);
  if (err > kRepairTolerance) {
    throw std::invalid_argument("TransformSE3: rotation is not orthonormal");
  }
  if (determinant(rotation) <= 0.0) {
    throw std::invalid_argument("TransformSE3: rotation must be proper (det +1)");
  }
  rotation_ = (err < kOrthonormalTolerance) ? rotation : polar_rotation(rotation);
  translation_ = translation;
}

TransformSE3 TransformSE3::from_yaw(double yaw, const Point3& translation) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return TransformSE3(r, translation);
}

TransformSE3 TransformSE3::from_axis_angle(const Point3& axis, double angle,
                                           const Point3& translation) {
  const double n = std::sqrt(axis.x * axis.x + axis.y * axis.y + axis.z * axis.z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("TransformSE3::from_axis_angle: zero axis");
  }
  const double ux = axis.x / n, uy = axis.y / n, uz = axis.z / n;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Mat3 r;
  r.m = {c + ux * ux * t,      ux * uy * t - uz * s, ux * uz * t + uy * s,
         uy * ux * t + uz * s, c + uy * uy * t,      uy * uz * t - ux * s,
         uz * ux * t - uy * s, uz * uy * t + ux * s, c + uz * uz * t};
  return TransformSE3(r, translation);
}

Point3 transform_point(const TransformSE3& t, const Point3& p) {
  const Point3 r = t.rotation() * p;
  return {r.x + t.translation().x, r.y + t.translation().y, r.z + t.translation().z};
}

Velocity2 transform_velocity(const TransformSE3& t, const Velocity2& v) {
  const Point3 r = t.rotation() * Point3{v.vx, v.vy, 0.0};
  return {r.x, r.y};
}

TransformSE3 compose(const TransformSE3& a, const TransformSE3& b) {
  const Point3 t = a.rotation() * b.translation();
  return TransformSE3(a.rotation() * b.rotation(),
                      {t.x + a.translation().x, t.y + a.translation().y,
                       t.z + a.translation().z});
}

TransformSE3 inverse(const TransformSE3& t) {
  const Mat3 rt = transpose(t.rotation());
  const Point3 nt = rt * t.translation();
  return TransformSE3(rt, {-nt.x, -nt.y, -nt.z});
}

double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double planar_distance(const Point3& a, const Point3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace refpts
