#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "firefly3d/detect.hpp"
#include "firefly3d/errors.hpp"
#include "firefly3d/geometry.hpp"
#include "firefly3d/util.hpp"

namespace firefly::match {

using geometry::CameraPose;
using geometry::Vec3;

struct MatchedPair {
  std::int64_t frame = 0;  // camera-1 clock
  std::size_t i1 = 0, i2 = 0;
  Vec3 b1 = Vec3::UnitZ(), b2 = Vec3::UnitZ();
  double residual_deg = 0.0;  // angular epipolar residual
};

struct Flash3D {
  std::int64_t frame = 0;
  geometry::Point3D position = geometry::Point3D::Zero();  // meters
  double r1 = 0.0, r2 = 0.0;                               // ray depths, meters
  double residual = 0.0;                                   // skew-line gap, meters
};

enum class Assignment { kMutualBest, kHungarian };

struct MatchParams {
  double tol_deg = 0.5;  // max angular epipolar residual
  Assignment assignment = Assignment::kMutualBest;
};

namespace detail {

// O(n^3) Hungarian on a square cost matrix; returns col index per row.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

// Matches detections of one aligned frame pair by angular epipolar residual.
// Mutual-best: a pair is kept when each detection is the other's minimum and
// the residual is under tol. Hungarian: maximum number of under-tol matches,
// minimum total residual among those.
inline std::vector<MatchedPair> match_frame(const std::vector<detect::Detection>& dets1,
                                            const std::vector<detect::Detection>& dets2,
                                            const CameraPose& pose, const MatchParams& params = {},
                                            std::int64_t frame = -1) {
  pose.require_valid(1e-6);
  const std::size_t n1 = dets1.size(), n2 = dets2.size();
  std::vector<MatchedPair> out;
  if (n1 == 0 || n2 == 0) return out;
  if (frame < 0) frame = dets1.front().frame;

  std::vector<Vec3> b1(n1), b2(n2);
  for (std::size_t i = 0; i < n1; ++i) b1[i] = geometry::angles_to_bearing(dets1[i].angles);
  for (std::size_t j = 0; j < n2; ++j) b2[j] = geometry::angles_to_bearing(dets2[j].angles);

  std::vector<std::vector<double>> res(n1, std::vector<double>(n2));
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) res[i][j] = geometry::epipolar_angle_deg(b1[i], b2[j], pose);

  auto emit = [&](std::size_t i, std::size_t j) {
    out.push_back({frame, i, j, b1[i], b2[j], res[i][j]});
  };

  if (params.assignment == Assignment::kMutualBest) {
    std::vector<std::size_t> best1(n1), best2(n2);
    for (std::size_t i = 0; i < n1; ++i)
      best1[i] = static_cast<std::size_t>(std::min_element(res[i].begin(), res[i].end()) - res[i].begin());
    for (std::size_t j = 0; j < n2; ++j) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n1; ++i)
        if (res[i][j] < res[arg][j]) arg = i;
      best2[j] = arg;
    }
    for (std::size_t i = 0; i < n1; ++i) {
      const std::size_t j = best1[i];
      if (best2[j] == i && res[i][j] < params.tol_deg) emit(i, j);
    }
  } else {
    // square padding: dummy rows/cols absorb unmatched detections
    const std::size_t n = n1 + n2;
    constexpr double kForbidden = 1e9;
    constexpr double kUnmatched = 1e3;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i < n1 && j < n2)
          cost[i][j] = res[i][j] < params.tol_deg ? res[i][j] : kForbidden;
        else if (i < n1 || j < n2)
          cost[i][j] = kUnmatched;
      }
    const auto assignment = detail::hungarian(cost);
    for (std::size_t i = 0; i < n1; ++i) {
      const int j = assignment[i];
      if (j >= 0 && static_cast<std::size_t>(j) < n2 && res[i][j] < params.tol_deg) emit(i, static_cast<std::size_t>(j));
    }
  }
  std::sort(out.begin(), out.end(), [](const MatchedPair& a, const MatchedPair& b) { return a.i1 < b.i1; });
  return out;
}

// ---------------------------------------------------------------------------
// Triangulation of matched pairs into metric 3D flashes
// ---------------------------------------------------------------------------

struct TriangulateParams {
  double separation_m = 1.0;     // measured camera separation s
  double residual_gate_m = 0.5;  // max skew-line gap after scaling
  double max_range_m = 100.0;    // reject epipolar-consistent but absurd depths
};

struct TriangulationTally {
  std::int64_t ok = 0;
  std::int64_t degenerate = 0;
  std::int64_t behind_camera = 0;
  std::int64_t residual_gate = 0;
  std::int64_t range_gate = 0;
};

inline std::vector<Flash3D> triangulate_all(const std::vector<MatchedPair>& pairs, const CameraPose& pose,
                                            const TriangulateParams& params, TriangulationTally* tally = nullptr) {
  if (params.separation_m <= 0.0) throw ConfigError("camera separation must be > 0");
  TriangulationTally local;
  TriangulationTally& t = tally ? *tally : local;
  std::vector<Flash3D> out;
  out.reserve(pairs.size());
  const double s = params.separation_m;
  for (const auto& p : pairs) {
    const auto tri = geometry::triangulate(p.b1, p.b2, pose);
    if (tri.status == geometry::TriangulationStatus::kDegenerate) {
      ++t.degenerate;
      continue;
    }
    if (tri.status == geometry::TriangulationStatus::kBehindCamera) {
      ++t.behind_camera;
      continue;
    }
    if (tri.residual * s > params.residual_gate_m) {
      ++t.residual_gate;
      continue;
    }
    if (tri.r1 * s > params.max_range_m || tri.r2 * s > params.max_range_m) {
      ++t.range_gate;
      continue;
    }
    ++t.ok;
    out.push_back({p.frame, tri.point * s, tri.r1 * s, tri.r2 * s, tri.residual * s});
  }
  return out;
}

// Convenience driver over whole detection streams: groups by frame, aligns
// camera 2 by delta_k, matches, triangulates.
inline std::vector<Flash3D> match_and_triangulate(const std::vector<detect::Detection>& det1,
                                                  const std::vector<detect::Detection>& det2, int delta_k,
                                                  const CameraPose& pose, const MatchParams& mparams,
                                                  const TriangulateParams& tparams,
                                                  TriangulationTally* tally = nullptr) {
  std::map<std::int64_t, std::vector<detect::Detection>> f1, f2;
  for (const auto& d : det1) f1[d.frame].push_back(d);
  for (const auto& d : det2) f2[d.frame].push_back(d);
  std::vector<Flash3D> out;
  for (const auto& [k, dets] : f1) {
    const auto it = f2.find(k + delta_k);
    if (it == f2.end()) continue;
    const auto pairs = match_frame(dets, it->second, pose, mparams, k);
    const auto flashes = triangulate_all(pairs, pose, tparams, tally);
    out.insert(out.end(), flashes.begin(), flashes.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outputs: flashes CSV + ASCII PLY point cloud
// ---------------------------------------------------------------------------

inline constexpr const char* kFlashesCsvHeader = "frame,x_m,y_m,z_m,r1,r2,residual";

inline void write_flashes_csv(const std::string& path, const std::vector<Flash3D>& flashes) {
  csv::Writer out(path, kFlashesCsvHeader);
  for (const auto& f : flashes)
    out.row({std::to_string(f.frame), format_double(f.position.x()), format_double(f.position.y()),
             format_double(f.position.z()), format_double(f.r1), format_double(f.r2),
             format_double(f.residual)});
}

inline std::vector<Flash3D> read_flashes_csv(const std::string& path) {
  csv::Reader in(path, kFlashesCsvHeader);
  std::vector<Flash3D> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    Flash3D f;
    f.frame = in.integer(i, 0);
    f.position = geometry::Point3D(in.num(i, 1), in.num(i, 2), in.num(i, 3));
    f.r1 = in.num(i, 4);
    f.r2 = in.num(i, 5);
    f.residual = in.num(i, 6);
    out.push_back(f);
  }
  return out;
}

inline void write_flashes_ply(const std::string& path, const std::vector<Flash3D>& flashes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write PLY: " + path);
  out << "ply\nformat ascii 1.0\nelement vertex " << flashes.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nproperty int frame\nend_header\n";
  for (const auto& f : flashes)
    out << format_float(static_cast<float>(f.position.x())) << " "
        << format_float(static_cast<float>(f.position.y())) << " "
        << format_float(static_cast<float>(f.position.z())) << " " << f.frame << "\n";
}

}  // namespace firefly::match
