#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firefly3d/errors.hpp"
#include "firefly3d/match.hpp"

namespace firefly::trajectory {

using match::Flash3D;
using json = nlohmann::ordered_json;

// Chain of flashes in strictly consecutive frames (one flash per frame).
struct Streak {
  int id = 0;
  std::vector<std::size_t> flashes;  // indices into the input flash list, frame order

  std::int64_t start_frame(const std::vector<Flash3D>& all) const { return all[flashes.front()].frame; }
  std::int64_t end_frame(const std::vector<Flash3D>& all) const { return all[flashes.back()].frame; }
};

// Train of streaks attributed to one individual.
struct Trajectory {
  int id = 0;
  std::vector<int> streak_ids;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
};

struct StreakParams {
  double d_max_m = 0.3;
  // Raw mode keeps plain connectivity components (two fireflies crossing
  // within d_max can merge); default resolves each frame transition by
  // nearest-distance one-to-one assignment.
  bool raw_components = false;
};

// Streak construction from the consecutive-frame / distance connectivity rule.
inline std::vector<Streak> build_streaks(const std::vector<Flash3D>& flashes, const StreakParams& params = {}) {
  const std::size_t n = flashes.size();
  std::vector<Streak> out;
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return flashes[a].frame != flashes[b].frame ? flashes[a].frame < flashes[b].frame : a < b;
  });
  std::map<std::int64_t, std::vector<std::size_t>> by_frame;
  for (std::size_t i : order) by_frame[flashes[i].frame].push_back(i);

  if (params.raw_components) {
    // union-find over all consecutive-frame edges under d_max
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& [frame, cur] : by_frame) {
      const auto it = by_frame.find(frame + 1);
      if (it == by_frame.end()) continue;
      for (std::size_t a : cur)
        for (std::size_t b : it->second)
          if ((flashes[a].position - flashes[b].position).norm() < params.d_max_m) parent[find(a)] = find(b);
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i : order) groups[find(i)].push_back(i);
    // emit in order of first member
    std::vector<std::vector<std::size_t>> comps;
    for (auto& [root, members] : groups) comps.push_back(std::move(members));
    std::sort(comps.begin(), comps.end(), [&](const auto& a, const auto& b) {
      return flashes[a.front()].frame != flashes[b.front()].frame ? flashes[a.front()].frame < flashes[b.front()].frame
                                                                  : a.front() < b.front();
    });
    int id = 0;
    for (auto& members : comps) out.push_back({id++, std::move(members)});
    return out;
  }

  // Default: per-transition one-to-one assignment, nearest distance first,
  // ties to the lower flash index.
  std::vector<std::size_t> successor(n, SIZE_MAX);
  std::vector<std::size_t> predecessor(n, SIZE_MAX);
  for (const auto& [frame, cur] : by_frame) {
    const auto it = by_frame.find(frame + 1);
    if (it == by_frame.end()) continue;
    struct Edge {
      double dist;
      std::size_t a, b;
    };
    std::vector<Edge> edges;
    for (std::size_t a : cur)
      for (std::size_t b : it->second) {
        const double d = (flashes[a].position - flashes[b].position).norm();
        if (d < params.d_max_m) edges.push_back({d, a, b});
      }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
      if (x.dist != y.dist) return x.dist < y.dist;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    for (const auto& e : edges) {
      if (successor[e.a] != SIZE_MAX || predecessor[e.b] != SIZE_MAX) continue;
      successor[e.a] = e.b;
      predecessor[e.b] = e.a;
    }
  }
  int id = 0;
  for (std::size_t i : order) {
    if (predecessor[i] != SIZE_MAX) continue;  // not a chain head
    Streak s;
    s.id = id++;
    for (std::size_t cur = i; cur != SIZE_MAX; cur = successor[cur]) s.flashes.push_back(cur);
    out.push_back(std::move(s));
  }
  return out;
}

struct LinkParams {
  double dt_max_s = 1.0;
  double dr_max_m = 1.0;
  double fps = 30.0;
};

// Greedy chronological linkage: each streak joins the nearest eligible earlier
// streak end (frame gap in [1, dt_max*fps], last-point-to-first-point distance
// <= dr_max); every streak gains at most one successor and one predecessor.
inline std::vector<Trajectory> link_trajectories(const std::vector<Flash3D>& flashes,
                                                 const std::vector<Streak>& streaks,
                                                 const LinkParams& params = {}) {
  if (params.fps <= 0.0) throw ConfigError("fps must be > 0");
  const std::size_t n = streaks.size();
  std::vector<Trajectory> out;
  if (n == 0) return out;
  const auto max_gap = static_cast<std::int64_t>(std::llround(params.dt_max_s * params.fps));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto sa = streaks[a].start_frame(flashes), sb = streaks[b].start_frame(flashes);
    return sa != sb ? sa < sb : streaks[a].id < streaks[b].id;
  });

  std::vector<bool> has_successor(n, false);
  std::vector<std::size_t> link_to(n, SIZE_MAX);  // predecessor streak (by position in `streaks`)
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t s = order[oi];
    const std::int64_t start = streaks[s].start_frame(flashes);
    const auto& first_pos = flashes[streaks[s].flashes.front()].position;
    double best_dist = std::numeric_limits<double>::infinity();
    std::size_t best = SIZE_MAX;
    for (std::size_t c = 0; c < n; ++c) {
      if (c == s || has_successor[c]) continue;
      const std::int64_t gap = start - streaks[c].end_frame(flashes);
      if (gap < 1 || gap > max_gap) continue;
      const double dist = (flashes[streaks[c].flashes.back()].position - first_pos).norm();
      if (dist > params.dr_max_m) continue;
      if (dist < best_dist || (dist == best_dist && best != SIZE_MAX && streaks[c].id < streaks[best].id)) {
        best_dist = dist;
        best = c;
      }
    }
    if (best != SIZE_MAX) {
      link_to[s] = best;
      has_successor[best] = true;
    }
  }

  // walk chains from their heads, in chronological head order
  int id = 0;
  for (std::size_t oi = 0; oi < n; ++oi) {
    const std::size_t s = order[oi];
    if (link_to[s] != SIZE_MAX) continue;  // has a predecessor, not a head
    // collect successors by scanning: build reverse map lazily
    Trajectory t;
    t.id = id++;
    std::size_t cur = s;
    while (true) {
      t.streak_ids.push_back(streaks[cur].id);
      std::size_t next = SIZE_MAX;
      for (std::size_t c = 0; c < n; ++c)
        if (link_to[c] == cur) {
          next = c;
          break;
        }
      if (next == SIZE_MAX) break;
      cur = next;
    }
    t.start_frame = streaks[s].start_frame(flashes);
    t.end_frame = streaks[cur].end_frame(flashes);
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoriesCsvHeader = "trajectory_id,streak_id,frame,x_m,y_m,z_m";

inline void write_trajectories_csv(const std::string& path, const std::vector<Flash3D>& flashes,
                                   const std::vector<Streak>& streaks,
                                   const std::vector<Trajectory>& trajectories) {
  std::map<int, const Streak*> by_id;
  for (const auto& s : streaks) by_id[s.id] = &s;
  csv::Writer out(path, kTrajectoriesCsvHeader);
  for (const auto& t : trajectories) {
    for (int sid : t.streak_ids) {
      const Streak* s = by_id.at(sid);
      for (std::size_t fi : s->flashes) {
        const auto& f = flashes[fi];
        out.row({std::to_string(t.id), std::to_string(sid), std::to_string(f.frame),
                 format_double(f.position.x()), format_double(f.position.y()),
                 format_double(f.position.z())});
      }
    }
  }
}

inline json summary_json(const std::vector<Flash3D>& flashes, const std::vector<Streak>& streaks,
                         const std::vector<Trajectory>& trajectories, double fps) {
  json j;
  j["n_flashes"] = flashes.size();
  j["n_streaks"] = streaks.size();
  j["n_trajectories"] = trajectories.size();
  std::map<std::size_t, std::int64_t> streak_len_hist;
  for (const auto& s : streaks) ++streak_len_hist[s.flashes.size()];
  json hist = json::object();
  for (const auto& [len, count] : streak_len_hist) hist[std::to_string(len)] = count;
  j["streak_length_histogram"] = hist;
  json durations = json::array();
  for (const auto& t : trajectories) {
    json d;
    d["trajectory_id"] = t.id;
    d["n_streaks"] = t.streak_ids.size();
    d["start_frame"] = t.start_frame;
    d["end_frame"] = t.end_frame;
    d["duration_s"] = fps > 0 ? static_cast<double>(t.end_frame - t.start_frame + 1) / fps : 0.0;
    durations.push_back(d);
  }
  j["trajectories"] = durations;
  return j;
}

}  // namespace firefly::trajectory
