#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "firefly3d/detect.hpp"
#include "firefly3d/errors.hpp"
#include "firefly3d/geometry.hpp"
#include "firefly3d/random.hpp"

namespace firefly::calibrate {

using geometry::CameraPose;
using geometry::Vec3;
using json = nlohmann::ordered_json;

// Per-frame detected-flash counts for one camera.
struct FlashCountSeries {
  int camera = 1;
  std::vector<std::int64_t> counts;

  std::size_t size() const { return counts.size(); }
};

inline FlashCountSeries count_series(const std::vector<detect::Detection>& dets, int camera,
                                     std::int64_t n_frames = -1) {
  FlashCountSeries s;
  s.camera = camera;
  std::int64_t max_frame = n_frames - 1;
  if (n_frames < 0) {
    for (const auto& d : dets) max_frame = std::max(max_frame, d.frame);
  }
  s.counts.assign(static_cast<std::size_t>(std::max<std::int64_t>(max_frame + 1, 1)), 0);
  for (const auto& d : dets) {
    if (d.frame >= 0 && d.frame < static_cast<std::int64_t>(s.counts.size())) ++s.counts[d.frame];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Temporal calibration
// ---------------------------------------------------------------------------

struct CorrelationResult {
  int best_lag = 0;
  int max_lag = 0;
  std::vector<double> curve;  // index lag + max_lag

  double at(int lag) const { return curve[static_cast<std::size_t>(lag + max_lag)]; }
};

// Correlation over the valid overlap, normalized by overlap length:
//   C(L) = sum_k n1(k) * n2(k+L) / overlap(L).
// A positive best lag means camera 2 sees events `lag` frames after camera 1.
inline CorrelationResult cross_correlate(const FlashCountSeries& n1, const FlashCountSeries& n2, int max_lag) {
  const std::int64_t k1 = static_cast<std::int64_t>(n1.size());
  const std::int64_t k2 = static_cast<std::int64_t>(n2.size());
  if (k1 == 0 || k2 == 0) throw DataError("cross_correlate: empty series");
  if (max_lag < 0 || max_lag >= std::min(k1, k2))
    throw std::domain_error("cross_correlate: max_lag must be in [0, min(K1,K2))");

  CorrelationResult res;
  res.max_lag = max_lag;
  res.curve.assign(static_cast<std::size_t>(2 * max_lag + 1), 0.0);

  // sparse path when the series are mostly zeros (flash counts usually are)
  std::vector<std::int64_t> nz1, nz2;
  for (std::int64_t k = 0; k < k1; ++k)
    if (n1.counts[k] != 0) nz1.push_back(k);
  for (std::int64_t k = 0; k < k2; ++k)
    if (n2.counts[k] != 0) nz2.push_back(k);
  if (nz1.empty() || nz2.empty()) throw DataError("cross_correlate: no signal (all-zero series)");

  const double sparse_cost = static_cast<double>(nz1.size()) * static_cast<double>(nz2.size());
  const double dense_cost = static_cast<double>(2 * max_lag + 1) * static_cast<double>(std::min(k1, k2));
  if (sparse_cost < dense_cost) {
    for (std::int64_t a : nz1) {
      const double va = static_cast<double>(n1.counts[a]);
      for (std::int64_t b : nz2) {
        const std::int64_t lag = b - a;
        if (lag < -max_lag || lag > max_lag) continue;
        res.curve[static_cast<std::size_t>(lag + max_lag)] += va * static_cast<double>(n2.counts[b]);
      }
    }
  } else {
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
      const std::int64_t lo = std::max<std::int64_t>(0, -lag);
      const std::int64_t hi = std::min(k1, k2 - lag);
      double acc = 0.0;
      for (std::int64_t k = lo; k < hi; ++k)
        acc += static_cast<double>(n1.counts[k]) * static_cast<double>(n2.counts[k + lag]);
      res.curve[static_cast<std::size_t>(lag + max_lag)] = acc;
    }
  }
  bool any = false;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const std::int64_t overlap = std::min(k1, k2 - lag) - std::max<std::int64_t>(0, -lag);
    auto& c = res.curve[static_cast<std::size_t>(lag + max_lag)];
    if (overlap > 0) {
      c /= static_cast<double>(overlap);
    } else {
      c = 0.0;
    }
    if (c > 0.0) any = true;
  }
  if (!any) throw DataError("cross_correlate: no signal (series never overlap)");

  // argmax; ties resolved toward the smallest |lag|, then the smallest lag
  int best = 0;
  double best_val = -1.0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const double v = res.at(lag);
    if (v > best_val ||
        (v == best_val && (std::abs(lag) < std::abs(best) || (std::abs(lag) == std::abs(best) && lag < best)))) {
      best_val = v;
      best = lag;
    }
  }
  res.best_lag = best;
  return res;
}

struct TemporalCalibration {
  int delta_k = 0;
  double support = 0.0;               // fraction of valid trials agreeing with the mode
  std::map<int, int> histogram;       // lag -> votes
  std::vector<int> tied_lags;         // all co-modal lags (size > 1 only on ties)
  int valid_trials = 0;
};

struct RansacParams {
  int trials = 100;
  int window = 2000;  // frames per random interval
  int max_lag = 500;
  double clean_quantile = 0.999;  // counts above this per-series quantile are zeroed
  std::uint64_t seed = 0;
};

inline std::vector<std::int64_t> cleaned_counts(const std::vector<std::int64_t>& counts, double quantile) {
  std::vector<std::int64_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  const auto idx = static_cast<std::size_t>(quantile * static_cast<double>(sorted.size() - 1));
  const std::int64_t limit = sorted[idx];
  std::vector<std::int64_t> out = counts;
  for (auto& c : out)
    if (c > limit) c = 0;
  return out;
}

// RANSAC-stabilized delay estimation: cross-correlate `trials` random aligned
// windows of the cleaned traces and take the modal lag.
inline TemporalCalibration ransac_delay(const FlashCountSeries& n1, const FlashCountSeries& n2,
                                        const RansacParams& params = {}) {
  if (params.trials < 1) throw std::domain_error("ransac_delay: trials must be >= 1");
  const std::int64_t k_min = static_cast<std::int64_t>(std::min(n1.size(), n2.size()));
  const int window = static_cast<int>(std::min<std::int64_t>(params.window, k_min));
  if (params.max_lag >= window)
    throw std::domain_error("ransac_delay: window must exceed max_lag (window " + std::to_string(window) +
                            ", max_lag " + std::to_string(params.max_lag) + ")");

  FlashCountSeries c1{n1.camera, cleaned_counts(n1.counts, params.clean_quantile)};
  FlashCountSeries c2{n2.camera, cleaned_counts(n2.counts, params.clean_quantile)};

  Rng rng(params.seed);
  TemporalCalibration cal;
  for (int trial = 0; trial < params.trials; ++trial) {
    const std::int64_t start = rng.uniform_int(0, k_min - window);
    FlashCountSeries w1{1, {c1.counts.begin() + start, c1.counts.begin() + start + window}};
    FlashCountSeries w2{2, {c2.counts.begin() + start, c2.counts.begin() + start + window}};
    try {
      const auto corr = cross_correlate(w1, w2, params.max_lag);
      ++cal.histogram[corr.best_lag];
      ++cal.valid_trials;
    } catch (const DataError&) {
      // window without signal; skip the trial
    }
  }
  if (cal.valid_trials == 0) throw DataError("ransac_delay: no window produced a valid correlation");

  int best_votes = 0;
  for (const auto& [lag, votes] : cal.histogram) best_votes = std::max(best_votes, votes);
  for (const auto& [lag, votes] : cal.histogram)
    if (votes == best_votes) cal.tied_lags.push_back(lag);
  cal.delta_k = *std::min_element(cal.tied_lags.begin(), cal.tied_lags.end(), [](int a, int b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
  });
  cal.support = static_cast<double>(best_votes) / static_cast<double>(cal.valid_trials);
  return cal;
}

// ---------------------------------------------------------------------------
// Spatial calibration
// ---------------------------------------------------------------------------

struct BearingPair {
  Vec3 b1 = Vec3::UnitZ();
  Vec3 b2 = Vec3::UnitZ();
  std::int64_t frame = 0;  // camera-1 clock
};

struct CalibrationSet {
  std::vector<BearingPair> pairs;
  std::size_t cap = 1000;

  std::size_t size() const { return pairs.size(); }
};

inline constexpr std::size_t kMinCalibrationPairs = 8;

inline double epipolar_residual(const BearingPair& pair, const CameraPose& pose) {
  return geometry::epipolar_residual(pair.b1, pair.b2, pose);
}

// Singleton matches: frames where each camera sees exactly one detection.
// Camera-2 frames are aligned by delta_k (cam2 frame = cam1 frame + delta_k).
// Oversized sets are subsampled round-robin over theta bins so the kept
// pairs stay spatially dispersed.
inline CalibrationSet build_calibration_set(const std::vector<detect::Detection>& det1,
                                            const std::vector<detect::Detection>& det2, int delta_k,
                                            std::size_t cap = 1000) {
  std::map<std::int64_t, std::vector<const detect::Detection*>> f1, f2;
  for (const auto& d : det1) f1[d.frame].push_back(&d);
  for (const auto& d : det2) f2[d.frame].push_back(&d);

  std::vector<BearingPair> all;
  for (const auto& [k, dets] : f1) {
    if (dets.size() != 1) continue;
    const auto it = f2.find(k + delta_k);
    if (it == f2.end() || it->second.size() != 1) continue;
    BearingPair p;
    p.b1 = geometry::angles_to_bearing(dets[0]->angles);
    p.b2 = geometry::angles_to_bearing(it->second[0]->angles);
    p.frame = k;
    all.push_back(p);
  }
  if (all.size() < kMinCalibrationPairs)
    throw DataError("calibration set has " + std::to_string(all.size()) + " singleton pairs; need >= " +
                    std::to_string(kMinCalibrationPairs) + " (pose would be underdetermined)");

  CalibrationSet set;
  set.cap = cap;
  if (all.size() <= cap) {
    set.pairs = std::move(all);
    return set;
  }
  constexpr int kThetaBins = 36;
  std::vector<std::vector<std::size_t>> bins(kThetaBins);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const double theta = geometry::bearing_to_angles(all[i].b1).theta_deg;
    const int b = std::min(kThetaBins - 1, static_cast<int>(theta / (360.0 / kThetaBins)));
    bins[b].push_back(i);
  }
  std::vector<std::size_t> cursor(kThetaBins, 0);
  std::vector<std::size_t> picked;
  while (picked.size() < cap) {
    bool advanced = false;
    for (int b = 0; b < kThetaBins && picked.size() < cap; ++b) {
      if (cursor[b] < bins[b].size()) {
        picked.push_back(bins[b][cursor[b]++]);
        advanced = true;
      }
    }
    if (!advanced) break;
  }
  std::sort(picked.begin(), picked.end());  // keep chronological order
  set.pairs.reserve(picked.size());
  for (std::size_t i : picked) set.pairs.push_back(all[i]);
  return set;
}

struct PoseEstimate {
  CameraPose pose;
  double cost = 0.0;  // mean squared epipolar residual
  int iterations = 0;
  bool converged = false;
  std::vector<double> residuals;
};

struct PoseSolverParams {
  int max_iterations = 200;
  double cost_rel_tol = 1e-12;
  double step_tol = 1e-10;
  double jacobian_step = 1e-7;
};

namespace detail {

// 5-dof parameterization: t by spherical angles (radians), R by axis-angle.
inline CameraPose pose_from_params(const Eigen::Matrix<double, 5, 1>& p) {
  CameraPose pose;
  pose.t = Vec3(std::cos(p[0]) * std::sin(p[1]), std::sin(p[0]) * std::sin(p[1]), std::cos(p[1]));
  pose.R = geometry::rotation_from_axis_angle(Vec3(p[2], p[3], p[4]));
  return pose;
}

inline Eigen::Matrix<double, 5, 1> params_from_pose(const CameraPose& pose) {
  Eigen::Matrix<double, 5, 1> p;
  const Vec3 t = pose.t.normalized();
  p[0] = std::atan2(t.y(), t.x());
  p[1] = std::acos(std::clamp(t.z(), -1.0, 1.0));
  const Vec3 aa = geometry::axis_angle_from_rotation(pose.R);
  p[2] = aa.x();
  p[3] = aa.y();
  p[4] = aa.z();
  return p;
}

inline void residual_vector(const CalibrationSet& set, const CameraPose& pose, Eigen::VectorXd& r) {
  const Vec3 t = pose.t;
  const auto rt = pose.R.transpose();
  for (std::size_t i = 0; i < set.size(); ++i)
    r[static_cast<Eigen::Index>(i)] = set.pairs[i].b1.dot(t.cross(rt * set.pairs[i].b2));
}

}  // namespace detail

// Levenberg-Marquardt over (t direction, R), numerically differentiated.
// Minimizes the mean squared coplanarity residual. The translation scale is
// unobservable; t keeps unit norm and metric scale is applied downstream.
inline PoseEstimate estimate_pose(const CalibrationSet& set, const CameraPose& initial,
                                  const PoseSolverParams& params = {}) {
  if (set.size() < kMinCalibrationPairs)
    throw DataError("estimate_pose: need >= " + std::to_string(kMinCalibrationPairs) + " pairs");
  initial.require_valid();

  const auto n = static_cast<Eigen::Index>(set.size());
  Eigen::Matrix<double, 5, 1> p = detail::params_from_pose(initial);
  Eigen::VectorXd r(n), r_try(n);
  detail::residual_vector(set, detail::pose_from_params(p), r);
  double cost = r.squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(cost)) throw NumericalError("estimate_pose: initial cost is not finite");

  PoseEstimate est;
  double lambda = 1e-4;
  bool converged = cost < 1e-30;
  int iter = 0;
  Eigen::MatrixXd jac(n, 5);
  while (!converged && iter < params.max_iterations) {
    ++iter;
    // central-difference Jacobian
    for (int j = 0; j < 5; ++j) {
      Eigen::Matrix<double, 5, 1> pp = p, pm = p;
      pp[j] += params.jacobian_step;
      pm[j] -= params.jacobian_step;
      detail::residual_vector(set, detail::pose_from_params(pp), r_try);
      jac.col(j) = r_try;
      detail::residual_vector(set, detail::pose_from_params(pm), r_try);
      jac.col(j) = (jac.col(j) - r_try) / (2.0 * params.jacobian_step);
    }
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 5, 1> jtr = jac.transpose() * r;

    bool stepped = false;
    while (lambda < 1e12) {
      Eigen::Matrix<double, 5, 5> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 5, 1> delta = damped.ldlt().solve(-jtr);
      detail::residual_vector(set, detail::pose_from_params(p + delta), r_try);
      const double new_cost = r_try.squaredNorm() / static_cast<double>(n);
      if (!std::isfinite(new_cost)) throw NumericalError("estimate_pose: cost became non-finite");
      if (new_cost < cost) {
        p += delta;
        r = r_try;
        const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (decrease < params.cost_rel_tol || delta.norm() < params.step_tol) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      converged = true;  // no descent direction left at any damping
      break;
    }
  }

  CameraPose pose = detail::pose_from_params(p);
  // re-orthonormalize and renormalize against accumulated rounding
  Eigen::JacobiSVD<geometry::Mat3> svd(pose.R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  pose.R = svd.matrixU() * svd.matrixV().transpose();
  if (pose.R.determinant() < 0) pose.R = -pose.R;
  pose.t.normalize();

  // cheirality: e(t,R) == -e(-t,R), so the cost cannot pick the sign of t.
  // Choose the sign that puts triangulated depths in front of both cameras.
  int front = 0, behind = 0;
  for (const auto& pair : set.pairs) {
    const auto tri = geometry::triangulate(pair.b1, pair.b2, pose);
    if (tri.status == geometry::TriangulationStatus::kDegenerate) continue;
    if (tri.r1 > 0 && tri.r2 > 0) ++front;
    if (tri.r1 < 0 && tri.r2 < 0) ++behind;
  }
  if (behind > front) pose.t = -pose.t;

  est.pose = pose;
  est.iterations = iter;
  est.converged = converged;
  est.residuals.resize(set.size());
  Eigen::VectorXd rf(n);
  detail::residual_vector(set, pose, rf);
  for (std::size_t i = 0; i < set.size(); ++i) est.residuals[i] = rf[static_cast<Eigen::Index>(i)];
  est.cost = rf.squaredNorm() / static_cast<double>(n);
  return est;
}

// ---------------------------------------------------------------------------
// Combined calibration result + JSON round trip
// ---------------------------------------------------------------------------

struct RigCalibration {
  int delta_k = 0;
  double support = 0.0;
  CameraPose pose;
  double cost = 0.0;
  std::int64_t n_pairs = 0;
  bool converged = false;
};

inline void write_calibration(const std::string& path, const RigCalibration& cal) {
  json j;
  j["delta_k"] = cal.delta_k;
  j["support"] = cal.support;
  j["t"] = {cal.pose.t.x(), cal.pose.t.y(), cal.pose.t.z()};
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(3 * i + k)] = cal.pose.R(i, k);
  j["R"] = r;  // row-major
  j["cost"] = cal.cost;
  j["n_pairs"] = cal.n_pairs;
  j["converged"] = cal.converged;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write calibration: " + path);
  out << j.dump(2) << "\n";
}

inline RigCalibration read_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calibration: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("calibration " + path + " is not valid JSON: " + e.what());
  }
  RigCalibration cal;
  cal.delta_k = j.at("delta_k").get<int>();
  cal.support = j.at("support").get<double>();
  const auto t = j.at("t").get<std::vector<double>>();
  const auto r = j.at("R").get<std::vector<double>>();
  if (t.size() != 3 || r.size() != 9) throw DataError("calibration " + path + ": bad t/R shape");
  cal.pose.t = Vec3(t[0], t[1], t[2]);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) cal.pose.R(i, k) = r[static_cast<std::size_t>(3 * i + k)];
  cal.cost = j.at("cost").get<double>();
  cal.n_pairs = j.at("n_pairs").get<std::int64_t>();
  cal.converged = j.at("converged").get<bool>();
  cal.pose.require_valid(1e-6);
  return cal;
}

}  // namespace firefly::calibrate
