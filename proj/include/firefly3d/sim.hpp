#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "firefly3d/classify.hpp"
#include "firefly3d/detect.hpp"
#include "firefly3d/errors.hpp"
#include "firefly3d/geometry.hpp"
#include "firefly3d/image_io.hpp"
#include "firefly3d/random.hpp"

namespace firefly::sim {

using geometry::CameraPose;
using geometry::Vec3;

// ---------------------------------------------------------------------------
// Scenario / rig / artifact configuration
// ---------------------------------------------------------------------------

struct SwarmScenario {
  int n_fireflies = 10;
  Vec3 volume_min{-8.0, -8.0, 1.0};  // meters, camera-1 frame
  Vec3 volume_max{8.0, 8.0, 6.0};
  int flashes_per_train = 6;
  int flash_duration_frames = 6;
  int inter_flash_gap_frames = 10;  // dark frames between flashes of a train
  int inter_train_gap_frames = 60;  // mean dark frames between trains (+-50% jitter)
  double drift_speed_mps = 0.2;
  int duration_frames = 3000;
  std::uint64_t seed = 1;

  void require_valid() const {
    if (n_fireflies < 1 || flashes_per_train < 1 || flash_duration_frames < 1 || duration_frames < 1 ||
        inter_flash_gap_frames < 0 || inter_train_gap_frames < 0)
      throw ConfigError("scenario counts must be positive");
    if (!((volume_max - volume_min).array() > 0.0).all())
      throw ConfigError("scenario volume is degenerate");
  }
};

struct RigGroundTruth {
  CameraPose pose;            // unit-baseline pose of camera 2
  double separation_m = 1.5;  // |t| in meters
  double height_m = 1.0;      // metadata only
  int delta_k = 0;            // camera-2 clock minus camera-1 clock
  double fps = 30.0;
  geometry::EquirectDims dims = geometry::EquirectDims::from_height(480);

  void require_valid() const {
    pose.require_valid(1e-9);
    if (separation_m <= 0.0 || fps <= 0.0) throw ConfigError("rig separation and fps must be > 0");
    dims.require_valid();
  }
};

// Artifact taxonomy for rendering: ambient light, persistent bright spots,
// transient bursts, and jittering clutter (the wind-in-vegetation analogue).
struct ArtifactSpec {
  double ambient_level = 8.0;     // base sky value
  double ambient_gradient = 0.0;  // extra ambient toward the horizon row
  int static_spot_count = 0;
  double static_spot_peak = 200.0;
  int burst_start_frame = -1;  // camera-1 clock; < 0 disables
  int burst_frames = 0;
  int burst_spots_per_frame = 40;
  double burst_peak = 220.0;
  int clutter_count = 0;
  int clutter_size_px = 21;
  double clutter_amplitude = 120.0;
  double clutter_jitter_px = 2.0;

  void require_valid() const {
    for (double a : {ambient_level, ambient_level + ambient_gradient, static_spot_peak, burst_peak,
                     clutter_amplitude})
      if (a < 0.0 || a > 255.0) throw ConfigError("artifact amplitudes must be within [0, 255]");
  }
};

// ---------------------------------------------------------------------------
// World-track generation: piecewise-constant drift between flash trains.
// ---------------------------------------------------------------------------

// One lit frame of one firefly, with its exact projections.
struct TruthFlash {
  int firefly = 0;
  std::int64_t frame = 0;  // camera-1 clock
  Vec3 world_m = Vec3::Zero();
  double w1 = 0, h1 = 0;  // exact pixel in camera 1
  double w2 = 0, h2 = 0;  // exact pixel in camera 2 (valid when in_cam2)
  bool in_cam2 = false;   // cam-2 frame index within the recording
};

namespace detail {

inline Vec3 random_unit(Rng& rng) {
  while (true) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

// Bearing noise: tilt by N(0, sigma) degrees about a random perpendicular axis.
inline Vec3 perturb_bearing(const Vec3& b, double sigma_deg, Rng& rng) {
  if (sigma_deg <= 0.0) return b;
  Vec3 axis;
  do {
    axis = random_unit(rng);
    axis -= axis.dot(b) * b;
  } while (axis.norm() < 1e-6);
  axis.normalize();
  const double angle = rng.normal() * sigma_deg * geometry::kRadPerDeg;
  return Eigen::AngleAxisd(angle, axis) * b;
}

inline double reflect_into(double x, double lo, double hi) {
  const double span = hi - lo;
  double y = std::fmod(x - lo, 2.0 * span);
  if (y < 0) y += 2.0 * span;
  return lo + (y <= span ? y : 2.0 * span - y);
}

}  // namespace detail

// Deterministic per-scenario swarm: positions drift with piecewise-constant
// velocity (resampled at each train start), flashes follow the train schedule.
inline std::vector<TruthFlash> generate_truth(const SwarmScenario& scenario, const RigGroundTruth& rig) {
  scenario.require_valid();
  rig.require_valid();
  std::vector<TruthFlash> truth;
  const double dt = 1.0 / rig.fps;
  const double s = rig.separation_m;

  for (int f = 0; f < scenario.n_fireflies; ++f) {
    Rng rng(scenario.seed * 1000003ull + static_cast<std::uint64_t>(f));
    Vec3 pos;
    for (int a = 0; a < 3; ++a) pos[a] = rng.uniform(scenario.volume_min[a], scenario.volume_max[a]);
    Vec3 vel = detail::random_unit(rng) * scenario.drift_speed_mps;

    // schedule state machine: within a train, ON/OFF flashes; then a gap
    int flashes_left = scenario.flashes_per_train;
    int phase_left = 1 + static_cast<int>(rng.uniform_int(0, std::max(1, scenario.inter_train_gap_frames)));
    bool lit = false;

    for (std::int64_t k = 0; k < scenario.duration_frames; ++k) {
      if (phase_left == 0) {
        if (lit) {
          lit = false;
          --flashes_left;
          if (flashes_left > 0) {
            phase_left = scenario.inter_flash_gap_frames;
          } else {
            const int gap = scenario.inter_train_gap_frames;
            phase_left = gap > 0 ? static_cast<int>(rng.uniform_int(gap - gap / 2, gap + gap / 2)) : 0;
            flashes_left = scenario.flashes_per_train;
            vel = detail::random_unit(rng) * scenario.drift_speed_mps;  // new leg of the walk
          }
        } else {
          lit = true;
          phase_left = scenario.flash_duration_frames;
        }
        if (phase_left == 0) phase_left = 1;
      }
      --phase_left;

      if (lit) {
        TruthFlash t;
        t.firefly = f;
        t.frame = k;
        t.world_m = pos;
        const auto a1 = geometry::project(pos / s, CameraPose::identity());
        std::tie(t.w1, t.h1) = geometry::angles_to_pixel(a1, rig.dims);
        const auto a2 = geometry::project(pos / s, rig.pose);
        std::tie(t.w2, t.h2) = geometry::angles_to_pixel(a2, rig.dims);
        const std::int64_t k2 = k + rig.delta_k;
        t.in_cam2 = k2 >= 0 && k2 < scenario.duration_frames;
        truth.push_back(t);
      }

      pos += vel * dt;
      for (int a = 0; a < 3; ++a) {
        const double reflected = detail::reflect_into(pos[a], scenario.volume_min[a], scenario.volume_max[a]);
        if (reflected != pos[a]) {
          pos[a] = reflected;
          vel[a] = -vel[a];
        }
      }
    }
  }
  std::sort(truth.begin(), truth.end(), [](const TruthFlash& a, const TruthFlash& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.firefly < b.firefly;
  });
  return truth;
}

// ---------------------------------------------------------------------------
// Detection-level simulation (no rendering)
// ---------------------------------------------------------------------------

struct DetectionNoise {
  double bearing_sigma_deg = 0.0;
  double dropout = 0.0;  // independent per camera per flash
  std::uint64_t seed = 7;
};

struct SimulatedDetections {
  std::vector<detect::Detection> cam1;
  std::vector<detect::Detection> cam2;
  std::vector<TruthFlash> truth;
};

inline SimulatedDetections simulate_detections(const SwarmScenario& scenario, const RigGroundTruth& rig,
                                               const DetectionNoise& noise = {}) {
  SimulatedDetections out;
  out.truth = generate_truth(scenario, rig);
  Rng rng(noise.seed);
  const double s = rig.separation_m;

  auto make_detection = [&](int camera, std::int64_t frame, const Vec3& bearing) {
    detect::Detection d;
    d.camera = camera;
    d.frame = frame;
    d.angles = geometry::bearing_to_angles(bearing);
    std::tie(d.w, d.h) = geometry::angles_to_pixel(d.angles, rig.dims);
    d.w_star = wrap_w(static_cast<int>(std::lround(d.w)), rig.dims.width);
    d.h_star = clamp_h(static_cast<int>(std::lround(d.h)), rig.dims.height);
    d.area = 5;
    d.peak = 200.0;
    return d;
  };

  for (const auto& t : out.truth) {
    const Vec3 x = t.world_m / s;
    {
      const Vec3 b = detail::perturb_bearing(x.normalized(), noise.bearing_sigma_deg, rng);
      if (!rng.bernoulli(noise.dropout)) out.cam1.push_back(make_detection(1, t.frame, b));
    }
    if (t.in_cam2) {
      const Vec3 v = rig.pose.R * (x - rig.pose.t);
      const Vec3 b = detail::perturb_bearing(v.normalized(), noise.bearing_sigma_deg, rng);
      if (!rng.bernoulli(noise.dropout)) out.cam2.push_back(make_detection(2, t.frame + rig.delta_k, b));
    }
  }
  auto by_frame = [](const detect::Detection& a, const detect::Detection& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.w < b.w;
  };
  std::sort(out.cam1.begin(), out.cam1.end(), by_frame);
  std::sort(out.cam2.begin(), out.cam2.end(), by_frame);
  return out;
}

inline constexpr const char* kTruthCsvHeader = "firefly,frame,x_m,y_m,z_m,w1,h1,w2,h2,in_cam2";

inline void write_truth_csv(const std::string& path, const std::vector<TruthFlash>& truth) {
  csv::Writer out(path, kTruthCsvHeader);
  for (const auto& t : truth)
    out.row({std::to_string(t.firefly), std::to_string(t.frame), format_double(t.world_m.x()),
             format_double(t.world_m.y()), format_double(t.world_m.z()), format_double(t.w1),
             format_double(t.h1), format_double(t.w2), format_double(t.h2),
             std::to_string(static_cast<int>(t.in_cam2))});
}

inline std::vector<TruthFlash> read_truth_csv(const std::string& path) {
  csv::Reader in(path, kTruthCsvHeader);
  std::vector<TruthFlash> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    TruthFlash t;
    t.firefly = static_cast<int>(in.integer(i, 0));
    t.frame = in.integer(i, 1);
    t.world_m = Vec3(in.num(i, 2), in.num(i, 3), in.num(i, 4));
    t.w1 = in.num(i, 5);
    t.h1 = in.num(i, 6);
    t.w2 = in.num(i, 7);
    t.h2 = in.num(i, 8);
    t.in_cam2 = in.integer(i, 9) != 0;
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame rendering with artifact injection
// ---------------------------------------------------------------------------

struct RenderParams {
  int channels = 3;
  double flash_peak = 200.0;
  double flash_sigma_px = 1.5;
  std::string format = "png";  // png | pgm (pgm forces grayscale)
};

// Everything random in a rendered scene, precomputed so per-frame rendering
// is a pure function (parallelizable, byte-stable).
struct SceneLayout {
  SwarmScenario scenario;
  RigGroundTruth rig;
  ArtifactSpec artifacts;
  RenderParams render;
  std::vector<TruthFlash> truth;
  std::map<std::int64_t, std::vector<std::size_t>> lit_by_cam_frame[2];  // camera frame -> truth indices

  struct Clutter {
    ImageF texture;                                 // speckle stamp
    std::vector<std::pair<double, double>> center;  // per frame, pixels
  };
  std::vector<Clutter> clutter[2];
  std::vector<std::pair<double, double>> static_spots[2];
  std::vector<std::vector<std::pair<double, double>>> burst_spots;  // per burst frame, camera 1
};

namespace detail {

inline void stamp_gaussian(ImageF& img, double cw, double ch, double peak, double sigma, bool wrap) {
  const int half = std::max(2, static_cast<int>(std::ceil(4.0 * sigma)));
  const int w0 = static_cast<int>(std::floor(cw));
  const int h0 = static_cast<int>(std::floor(ch));
  for (int dh = -half; dh <= half; ++dh) {
    const int h = h0 + dh;
    if (h < 0 || h >= img.height) continue;
    for (int dw = -half; dw <= half; ++dw) {
      int w = w0 + dw;
      if (wrap)
        w = wrap_w(w, img.width);
      else if (w < 0 || w >= img.width)
        continue;
      const double r2 = (w0 + dw - cw) * (w0 + dw - cw) + (h - ch) * (h - ch);
      img.at(w, h) += peak * std::exp(-0.5 * r2 / (sigma * sigma));
    }
  }
}

}  // namespace detail

inline SceneLayout build_scene_layout(const SwarmScenario& scenario, const RigGroundTruth& rig,
                                      const ArtifactSpec& artifacts, const RenderParams& render = {}) {
  artifacts.require_valid();
  SceneLayout lay;
  lay.scenario = scenario;
  lay.rig = rig;
  lay.artifacts = artifacts;
  lay.render = render;
  lay.truth = generate_truth(scenario, rig);
  for (std::size_t i = 0; i < lay.truth.size(); ++i) {
    const auto& t = lay.truth[i];
    lay.lit_by_cam_frame[0][t.frame].push_back(i);
    if (t.in_cam2) lay.lit_by_cam_frame[1][t.frame + rig.delta_k].push_back(i);
  }

  Rng rng(scenario.seed ^ 0x9e3779b97f4a7c15ull);
  const double s = rig.separation_m;
  // persistent lights: distant world points, projected into both cameras
  for (int i = 0; i < artifacts.static_spot_count; ++i) {
    const Vec3 dir = detail::random_unit(rng);
    const Vec3 world = dir * 50.0;  // far enough that parallax is small
    for (int cam = 0; cam < 2; ++cam) {
      const auto a = geometry::project(world / s, cam == 0 ? CameraPose::identity() : rig.pose);
      lay.static_spots[cam].push_back(geometry::angles_to_pixel(a, rig.dims));
    }
  }
  // moving clutter: per-camera image-space speckle patches on a jitter walk
  for (int cam = 0; cam < 2; ++cam) {
    for (int i = 0; i < artifacts.clutter_count; ++i) {
      SceneLayout::Clutter c;
      const int sz = std::max(5, artifacts.clutter_size_px);
      c.texture = ImageF(sz, sz, 1, 0.0);
      for (auto& v : c.texture.data)
        v = rng.bernoulli(0.35) ? artifacts.clutter_amplitude * rng.uniform(0.5, 1.0) : 0.0;
      double cw = rng.uniform(0.0, rig.dims.width);
      double ch = rng.uniform(rig.dims.height * 0.25, rig.dims.height * 0.75);
      c.center.reserve(scenario.duration_frames);
      for (int k = 0; k < scenario.duration_frames; ++k) {
        c.center.emplace_back(cw, ch);
        cw += rng.uniform(-artifacts.clutter_jitter_px, artifacts.clutter_jitter_px);
        ch += rng.uniform(-artifacts.clutter_jitter_px, artifacts.clutter_jitter_px);
        ch = std::clamp(ch, 0.0, rig.dims.height - 1.0);
      }
      lay.clutter[cam].push_back(std::move(c));
    }
  }
  // transient burst: random bright spots, camera 1
  if (artifacts.burst_start_frame >= 0) {
    lay.burst_spots.resize(artifacts.burst_frames);
    for (auto& frame_spots : lay.burst_spots) {
      for (int i = 0; i < artifacts.burst_spots_per_frame; ++i)
        frame_spots.emplace_back(rng.uniform(0.0, rig.dims.width), rng.uniform(0.0, rig.dims.height));
    }
  }
  return lay;
}

// Pure per-frame composition: ambient + artifacts + flash blobs, additive,
// saturating at 255 like an 8-bit sensor.
inline ImageU8 render_frame(const SceneLayout& lay, int camera, std::int64_t k) {
  const auto& dims = lay.rig.dims;
  const int cam = camera - 1;
  ImageF acc(dims.width, dims.height, 1, 0.0);
  for (int h = 0; h < dims.height; ++h) {
    const double ambient =
        lay.artifacts.ambient_level + lay.artifacts.ambient_gradient * (static_cast<double>(h) / dims.height);
    for (int w = 0; w < dims.width; ++w) acc.at(w, h) = ambient;
  }
  for (const auto& [cw, ch] : lay.static_spots[cam])
    detail::stamp_gaussian(acc, cw, ch, lay.artifacts.static_spot_peak, 2.0, true);
  for (const auto& c : lay.clutter[cam]) {
    if (k < 0 || k >= static_cast<std::int64_t>(c.center.size())) continue;
    const auto [cw, ch] = c.center[static_cast<std::size_t>(k)];
    const int w0 = static_cast<int>(std::lround(cw)) - c.texture.width / 2;
    const int h0 = static_cast<int>(std::lround(ch)) - c.texture.height / 2;
    for (int dh = 0; dh < c.texture.height; ++dh) {
      const int h = h0 + dh;
      if (h < 0 || h >= dims.height) continue;
      for (int dw = 0; dw < c.texture.width; ++dw)
        acc.at(wrap_w(w0 + dw, dims.width), h) += c.texture.at(dw, dh);
    }
  }
  if (cam == 0 && lay.artifacts.burst_start_frame >= 0) {
    const std::int64_t b = k - lay.artifacts.burst_start_frame;
    if (b >= 0 && b < static_cast<std::int64_t>(lay.burst_spots.size()))
      for (const auto& [cw, ch] : lay.burst_spots[static_cast<std::size_t>(b)])
        detail::stamp_gaussian(acc, cw, ch, lay.artifacts.burst_peak, 1.5, true);
  }
  ImageF flash_layer(dims.width, dims.height, 1, 0.0);
  const auto it = lay.lit_by_cam_frame[cam].find(k);
  if (it != lay.lit_by_cam_frame[cam].end()) {
    for (std::size_t i : it->second) {
      const auto& t = lay.truth[i];
      const double cw = cam == 0 ? t.w1 : t.w2;
      const double ch = cam == 0 ? t.h1 : t.h2;
      detail::stamp_gaussian(flash_layer, cw, ch, lay.render.flash_peak, lay.render.flash_sigma_px, true);
    }
  }

  const bool rgb = lay.render.channels == 3 && lay.render.format != "pgm";
  ImageU8 img(dims.width, dims.height, rgb ? 3 : 1);
  // flashes skew yellow-green; everything else stays near-neutral
  constexpr double kFlashTint[3] = {0.72, 1.0, 0.48};
  constexpr double kSceneTint[3] = {0.92, 0.96, 1.0};
  for (int h = 0; h < dims.height; ++h) {
    for (int w = 0; w < dims.width; ++w) {
      const double bg = acc.at(w, h);
      const double fl = flash_layer.at(w, h);
      if (rgb) {
        for (int c = 0; c < 3; ++c) img.at(w, h, c) = clamp_u8(bg * kSceneTint[c] + fl * kFlashTint[c]);
      } else {
        img.at(w, h) = clamp_u8(bg + fl);
      }
    }
  }
  return img;
}

// Renders both cameras to <out_dir>/cam1, <out_dir>/cam2 as numbered frames.
inline void render_frames(const SceneLayout& lay, const std::string& out_dir, int threads = 1) {
  namespace fs = std::filesystem;
  const std::string ext = lay.render.format == "png" ? ".png" : (lay.render.channels == 3 ? ".ppm" : ".pgm");
  for (int cam = 1; cam <= 2; ++cam) {
    const fs::path dir = fs::path(out_dir) / ("cam" + std::to_string(cam));
    fs::create_directories(dir);
    parallel_for(static_cast<std::size_t>(lay.scenario.duration_frames), threads, [&](std::size_t k) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06zu%s", k, ext.c_str());
      write_image((dir / name).string(), render_frame(lay, cam, static_cast<std::int64_t>(k)));
    });
  }
}

// ---------------------------------------------------------------------------
// Labeled patch corpus from rendered ground truth
// ---------------------------------------------------------------------------

// Flash patches are cut at true flash pixels, artifact patches at clutter and
// persistent-light peaks. Seeds whose extracted center wanders away from the
// intended target (a brighter neighbor stole the crop) are skipped. Candidate
// seeds are grouped by frame so each frame renders at most once.
inline classify::PatchDataset make_patch_corpus(const SceneLayout& lay, int n_per_class,
                                                std::uint64_t seed = 11, const std::string& out_root = "") {
  Rng rng(seed);
  const double max_drift = 6.0;
  const bool has_clutter = !lay.clutter[0].empty();
  const bool has_static = !lay.static_spots[0].empty();
  if (!has_clutter && !has_static)
    throw ConfigError("make_patch_corpus: scene has no artifact sources for the artifact class");

  struct Seed {
    std::int64_t frame;
    double w, h;
    int label;
  };
  std::vector<Seed> seeds;

  // flash class: oversample lit truth entries (some get skipped later)
  std::vector<std::size_t> flash_order(lay.truth.size());
  std::iota(flash_order.begin(), flash_order.end(), 0);
  rng.shuffle(flash_order);
  const int oversample = n_per_class + n_per_class / 2;
  for (std::size_t i = 0; i < flash_order.size() && static_cast<int>(i) < oversample; ++i) {
    const auto& t = lay.truth[flash_order[i]];
    seeds.push_back({t.frame, t.w1, t.h1, 1});
  }

  // artifact class: clutter centers (and static spots) at random frames,
  // away from any lit flash
  int guard = 0;
  int n_artifact_seeds = 0;
  while (n_artifact_seeds < oversample && guard++ < 100 * n_per_class) {
    const std::int64_t k = rng.uniform_int(0, lay.scenario.duration_frames - 1);
    double cw, ch;
    if (has_clutter && (!has_static || rng.bernoulli(0.8))) {
      const auto& c = lay.clutter[0][static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(lay.clutter[0].size()) - 1))];
      std::tie(cw, ch) = c.center[static_cast<std::size_t>(k)];
    } else {
      std::tie(cw, ch) = lay.static_spots[0][static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(lay.static_spots[0].size()) - 1))];
    }
    bool near_flash = false;
    const auto it = lay.lit_by_cam_frame[0].find(k);
    if (it != lay.lit_by_cam_frame[0].end()) {
      for (std::size_t i : it->second)
        if (std::hypot(lay.truth[i].w1 - cw, lay.truth[i].h1 - ch) < 2.0 * detect::kPatchSize) near_flash = true;
    }
    if (near_flash) continue;
    seeds.push_back({k, cw, ch, 0});
    ++n_artifact_seeds;
  }

  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.frame < b.frame; });

  classify::PatchDataset ds;
  int n_kept[2] = {0, 0};
  std::int64_t cached_frame = -1;
  ImageU8 frame;
  for (const auto& s : seeds) {
    if (n_kept[s.label] >= n_per_class) continue;
    if (s.frame != cached_frame) {
      frame = render_frame(lay, 1, s.frame);
      cached_frame = s.frame;
    }
    auto p = detect::extract_patch(frame, static_cast<int>(std::lround(s.w)),
                                   static_cast<int>(std::lround(s.h)), s.frame);
    const double drift_limit = s.label == 1 ? max_drift : detect::kPatchSize;
    if (std::hypot(p.center_w - s.w, p.center_h - s.h) > drift_limit) continue;
    ds.add(std::move(p), s.label);
    ++n_kept[s.label];
  }

  if (!out_root.empty()) {
    for (const auto& p : ds.patches) detect::write_patch(out_root, p);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Scene configuration file: scenario + rig + artifacts + render + noise in
// one JSON document.
// ---------------------------------------------------------------------------

struct SceneConfig {
  SwarmScenario scenario;
  RigGroundTruth rig;
  ArtifactSpec artifacts;
  RenderParams render;
  DetectionNoise noise;
};

inline SceneConfig scene_from_json(const nlohmann::json& j) {
  SceneConfig c;
  try {
    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      auto& sc = c.scenario;
      sc.n_fireflies = s.value("n_fireflies", sc.n_fireflies);
      if (s.contains("volume_min")) {
        const auto v = s["volume_min"].get<std::vector<double>>();
        sc.volume_min = Vec3(v.at(0), v.at(1), v.at(2));
      }
      if (s.contains("volume_max")) {
        const auto v = s["volume_max"].get<std::vector<double>>();
        sc.volume_max = Vec3(v.at(0), v.at(1), v.at(2));
      }
      sc.flashes_per_train = s.value("flashes_per_train", sc.flashes_per_train);
      sc.flash_duration_frames = s.value("flash_duration_frames", sc.flash_duration_frames);
      sc.inter_flash_gap_frames = s.value("inter_flash_gap_frames", sc.inter_flash_gap_frames);
      sc.inter_train_gap_frames = s.value("inter_train_gap_frames", sc.inter_train_gap_frames);
      sc.drift_speed_mps = s.value("drift_speed_mps", sc.drift_speed_mps);
      sc.duration_frames = s.value("duration_frames", sc.duration_frames);
      sc.seed = s.value("seed", sc.seed);
    }
    if (j.contains("rig")) {
      const auto& r = j["rig"];
      if (r.contains("t")) {
        const auto v = r["t"].get<std::vector<double>>();
        c.rig.pose.t = Vec3(v.at(0), v.at(1), v.at(2)).normalized();
      }
      if (r.contains("rotation_axis_angle_deg")) {
        const auto v = r["rotation_axis_angle_deg"].get<std::vector<double>>();
        c.rig.pose.R = geometry::rotation_from_axis_angle(Vec3(v.at(0), v.at(1), v.at(2)) * geometry::kRadPerDeg);
      }
      c.rig.separation_m = r.value("separation_m", c.rig.separation_m);
      c.rig.height_m = r.value("height_m", c.rig.height_m);
      c.rig.delta_k = r.value("delta_k", c.rig.delta_k);
      c.rig.fps = r.value("fps", c.rig.fps);
      if (r.contains("dims_height"))
        c.rig.dims = geometry::EquirectDims::from_height(r["dims_height"].get<int>());
    }
    if (j.contains("artifacts")) {
      const auto& a = j["artifacts"];
      auto& art = c.artifacts;
      art.ambient_level = a.value("ambient_level", art.ambient_level);
      art.ambient_gradient = a.value("ambient_gradient", art.ambient_gradient);
      art.static_spot_count = a.value("static_spot_count", art.static_spot_count);
      art.static_spot_peak = a.value("static_spot_peak", art.static_spot_peak);
      art.burst_start_frame = a.value("burst_start_frame", art.burst_start_frame);
      art.burst_frames = a.value("burst_frames", art.burst_frames);
      art.burst_spots_per_frame = a.value("burst_spots_per_frame", art.burst_spots_per_frame);
      art.burst_peak = a.value("burst_peak", art.burst_peak);
      art.clutter_count = a.value("clutter_count", art.clutter_count);
      art.clutter_size_px = a.value("clutter_size_px", art.clutter_size_px);
      art.clutter_amplitude = a.value("clutter_amplitude", art.clutter_amplitude);
      art.clutter_jitter_px = a.value("clutter_jitter_px", art.clutter_jitter_px);
    }
    if (j.contains("render")) {
      const auto& r = j["render"];
      c.render.channels = r.value("channels", c.render.channels);
      c.render.flash_peak = r.value("flash_peak", c.render.flash_peak);
      c.render.flash_sigma_px = r.value("flash_sigma_px", c.render.flash_sigma_px);
      c.render.format = r.value("format", c.render.format);
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      c.noise.bearing_sigma_deg = n.value("bearing_sigma_deg", c.noise.bearing_sigma_deg);
      c.noise.dropout = n.value("dropout", c.noise.dropout);
      c.noise.seed = n.value("seed", c.noise.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  return c;
}

inline SceneConfig load_scene_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scene config " + path + " is not valid JSON: " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace firefly::sim
