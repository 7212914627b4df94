#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>
#include <string>

namespace firefly::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double kDegPerRad = 180.0 / M_PI;
constexpr double kRadPerDeg = M_PI / 180.0;

// Equirectangular frame of size 2P x P pixels. The horizontal axis spans the
// full polar turn (360 deg), the vertical axis the azimuthal half-turn (180 deg).
struct EquirectDims {
  int width = 0;   // 2P
  int height = 0;  // P

  static EquirectDims from_height(int p) { return {2 * p, p}; }

  bool valid() const { return height >= 2 && width == 2 * height; }
  void require_valid() const {
    if (!valid())
      throw std::domain_error("equirectangular dims must satisfy width == 2*height, height >= 2 (got " +
                              std::to_string(width) + "x" + std::to_string(height) + ")");
  }
};

// Spherical direction in degrees: theta polar in [0, 360), phi azimuthal in [0, 180].
struct SphericalAngles {
  double theta_deg = 0.0;
  double phi_deg = 0.0;

  bool in_range() const {
    return theta_deg >= 0.0 && theta_deg < 360.0 && phi_deg >= 0.0 && phi_deg <= 180.0;
  }
};

// Unit 3-vector toward a detection, in a camera's own frame.
using Bearing = Vec3;

inline constexpr double kUnitTol = 1e-9;

inline bool is_unit(const Vec3& v, double tol = kUnitTol) { return std::abs(v.norm() - 1.0) <= tol; }

// Relative pose of camera 2 w.r.t. camera 1: camera 2 sits at t (unit direction,
// baseline length is the unit of the reconstruction) and a camera-1-frame vector x
// maps into camera 2's frame as R * x. Metric scale comes from the measured
// camera separation, applied downstream.
struct CameraPose {
  Vec3 t = Vec3::UnitX();
  Mat3 R = Mat3::Identity();

  static CameraPose identity() { return {}; }

  bool valid(double tol = kUnitTol) const {
    if (!is_unit(t, tol)) return false;
    if (((R.transpose() * R) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(R.determinant() - 1.0) <= tol;
  }
  void require_valid(double tol = kUnitTol) const {
    if (!valid(tol)) throw std::domain_error("camera pose invalid: t must be unit, R a proper rotation");
  }

  // Pose of camera 1 as seen from camera 2 (swapped roles). ||-R t|| == ||t|| == 1.
  CameraPose inverse() const { return {-(R * t), R.transpose()}; }
};

using Point3D = Vec3;

// ---------------------------------------------------------------------------
// Pixel <-> angle <-> bearing conversions
// ---------------------------------------------------------------------------

inline SphericalAngles pixel_to_angles(double w, double h, const EquirectDims& dims) {
  dims.require_valid();
  const double p = static_cast<double>(dims.height);
  if (!(w >= 0.0 && w < 2.0 * p && h >= 0.0 && h <= p))
    throw std::domain_error("pixel out of range: (" + std::to_string(w) + ", " + std::to_string(h) + ")");
  return {360.0 * w / (2.0 * p), 180.0 * h / p};
}

// Real-valued pixel coordinates; the exact inverse of pixel_to_angles.
inline std::pair<double, double> angles_to_pixel(const SphericalAngles& a, const EquirectDims& dims) {
  dims.require_valid();
  if (!a.in_range())
    throw std::domain_error("angles out of range: theta " + std::to_string(a.theta_deg) + ", phi " +
                            std::to_string(a.phi_deg));
  const double p = static_cast<double>(dims.height);
  return {a.theta_deg * 2.0 * p / 360.0, a.phi_deg * p / 180.0};
}

inline Bearing angles_to_bearing(const SphericalAngles& a) {
  if (!a.in_range())
    throw std::domain_error("angles out of range: theta " + std::to_string(a.theta_deg) + ", phi " +
                            std::to_string(a.phi_deg));
  const double th = a.theta_deg * kRadPerDeg;
  const double ph = a.phi_deg * kRadPerDeg;
  return {std::cos(th) * std::sin(ph), std::sin(th) * std::sin(ph), std::cos(ph)};
}

// Inverse of angles_to_bearing. theta is undefined at the poles (phi 0 or 180)
// and canonicalized to 0 there.
inline SphericalAngles bearing_to_angles(const Bearing& b) {
  if (!is_unit(b)) throw std::domain_error("bearing must be a unit vector (norm " + std::to_string(b.norm()) + ")");
  const double phi = std::acos(std::clamp(b.z(), -1.0, 1.0)) * kDegPerRad;
  double theta = 0.0;
  if (std::abs(b.x()) > 0.0 || std::abs(b.y()) > 0.0) {
    theta = std::atan2(b.y(), b.x()) * kDegPerRad;
    if (theta < 0.0) theta += 360.0;
    if (theta >= 360.0) theta = 0.0;  // atan2 rounding at the wrap
  }
  return {theta, phi};
}

// ---------------------------------------------------------------------------
// Two-view triangulation
// ---------------------------------------------------------------------------

enum class TriangulationStatus {
  kOk,
  kDegenerate,    // near-parallel rays, normal system ill-conditioned
  kBehindCamera,  // least-squares depth negative on at least one ray
};

struct TriangulationResult {
  TriangulationStatus status = TriangulationStatus::kOk;
  Point3D point = Point3D::Zero();  // r1 * b1, in baseline units
  double r1 = 0.0;
  double r2 = 0.0;
  double residual = 0.0;  // skew-line gap |r1 b1 - t - r2 R^T b2|

  bool ok() const { return status == TriangulationStatus::kOk; }
};

inline constexpr double kTriangulationConditionLimit = 1e8;

// Solves  r1 b1 - (t + R^-1 r2 b2) = 0  in the least-squares sense via the
// 2x2 normal equations and reports the point on ray 1.
inline TriangulationResult triangulate(const Bearing& b1, const Bearing& b2, const CameraPose& pose) {
  pose.require_valid();
  if (!is_unit(b1) || !is_unit(b2)) throw std::domain_error("triangulate: bearings must be unit vectors");

  const Vec3 d = pose.R.transpose() * b2;  // camera-2 ray expressed in camera-1 frame
  const double c = b1.dot(d);
  // Normal matrix [[1,-c],[-c,1]] has eigenvalues 1 +- |c|.
  const double cond = (1.0 + std::abs(c)) / std::max(1.0 - std::abs(c), 0.0);
  TriangulationResult res;
  if (!(cond <= kTriangulationConditionLimit)) {
    res.status = TriangulationStatus::kDegenerate;
    return res;
  }
  const double a = b1.dot(pose.t);
  const double b = d.dot(pose.t);
  const double det = 1.0 - c * c;
  res.r1 = (a - c * b) / det;
  res.r2 = (c * a - b) / det;
  res.point = res.r1 * b1;
  res.residual = (res.r1 * b1 - pose.t - res.r2 * d).norm();
  if (res.r1 <= 0.0 || res.r2 <= 0.0) res.status = TriangulationStatus::kBehindCamera;
  return res;
}

// Forward model: spherical angles of a world point as seen by a camera.
// Camera 1 is the world frame (identity pose); for camera 2 pass the rig pose.
// The point must be expressed in the same units as the pose translation.
inline SphericalAngles project(const Point3D& point, const CameraPose& pose = CameraPose::identity()) {
  const Vec3 v = pose.R * (point - pose.t);
  const double n = v.norm();
  if (n < 1e-15) throw std::domain_error("project: point coincides with the camera center");
  return bearing_to_angles(v / n);
}

// Coplanarity (epipolar) residual b1 . (t x R^-1 b2); zero exactly when the two
// rays and the baseline lie in one plane, i.e. the pair triangulates exactly.
inline double epipolar_residual(const Bearing& b1, const Bearing& b2, const CameraPose& pose) {
  return b1.dot(pose.t.cross(pose.R.transpose() * b2));
}

// Same residual expressed as the angle (degrees) of b1 out of the epipolar
// plane spanned by t and R^-1 b2. Returns 0 for the degenerate plane
// (detection along the baseline), which is uninformative for matching.
inline double epipolar_angle_deg(const Bearing& b1, const Bearing& b2, const CameraPose& pose) {
  const Vec3 n = pose.t.cross(pose.R.transpose() * b2);
  const double nn = n.norm();
  if (nn < 1e-12) return 0.0;
  return std::asin(std::clamp(std::abs(b1.dot(n)) / nn, 0.0, 1.0)) * kDegPerRad;
}

// Axis-angle <-> rotation helpers shared by calibration and the simulator.
inline Mat3 rotation_from_axis_angle(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

inline Vec3 axis_angle_from_rotation(const Mat3& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

// Angle between two rotations, degrees.
inline double rotation_angle_deg(const Mat3& r1, const Mat3& r2) {
  const double c = std::clamp(((r1 * r2.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * kDegPerRad;
}

inline double direction_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * kDegPerRad;
}

}  // namespace firefly::geometry
