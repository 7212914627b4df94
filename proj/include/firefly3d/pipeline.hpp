#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firefly3d/calibrate.hpp"
#include "firefly3d/classify.hpp"
#include "firefly3d/detect.hpp"
#include "firefly3d/errors.hpp"
#include "firefly3d/match.hpp"
#include "firefly3d/trajectory.hpp"
#include "firefly3d/util.hpp"

namespace firefly::pipeline {

using json = nlohmann::ordered_json;

inline constexpr int kConfigFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;

// ---------------------------------------------------------------------------
// Configuration: JSON file with flag overrides layered on top by the CLI.
// ---------------------------------------------------------------------------

struct RigConfig {
  // rig
  double separation_m = 1.5;
  double height_m = 1.0;  // metadata only
  double fps = 30.0;
  // input: frame directories, or precomputed detection CSVs
  std::string cam1_frames, cam2_frames;
  std::string cam1_detections, cam2_detections;
  // detect
  double threshold = 25.0;
  double tau_s = 2.0;
  double blur_radius = 1.0;
  // classify
  std::string model_path;
  double min_prob = 0.5;
  // calibrate
  int max_lag = 500;
  int ransac_trials = 100;
  int ransac_window = 2000;
  double clean_quantile = 0.999;
  int pairs_cap = 1000;
  // match
  double match_tol_deg = 0.5;
  double residual_gate_m = 0.5;
  double max_range_m = 100.0;
  std::string assignment = "mutual";  // mutual | hungarian
  // trajectory
  double d_max_m = 0.3;
  double dt_max_s = 1.0;
  double dr_max_m = 1.0;
  bool raw_streaks = false;
  // run
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = "out";

  void validate() const {
    if (separation_m <= 0.0) throw ConfigError("rig.separation_m must be > 0");
    if (fps <= 0.0) throw ConfigError("rig.fps must be > 0");
    if (threshold <= 0.0 || threshold > 255.0) throw ConfigError("detect.threshold must be in (0, 255]");
    if (tau_s <= 0.0) throw ConfigError("detect.tau_s must be > 0");
    if (blur_radius < 0.0) throw ConfigError("detect.blur_radius must be >= 0");
    if (min_prob < 0.0 || min_prob > 1.0) throw ConfigError("classify.min_prob must be in [0, 1]");
    if (max_lag < 1 || ransac_trials < 1 || ransac_window < 2) throw ConfigError("calibrate values must be positive");
    if (clean_quantile <= 0.0 || clean_quantile > 1.0) throw ConfigError("calibrate.clean_quantile must be in (0, 1]");
    if (pairs_cap < static_cast<int>(calibrate::kMinCalibrationPairs)) throw ConfigError("calibrate.pairs_cap too small");
    if (match_tol_deg <= 0.0 || residual_gate_m <= 0.0 || max_range_m <= 0.0)
      throw ConfigError("match gates must be > 0");
    if (assignment != "mutual" && assignment != "hungarian")
      throw ConfigError("match.assignment must be 'mutual' or 'hungarian'");
    if (d_max_m <= 0.0 || dt_max_s <= 0.0 || dr_max_m <= 0.0) throw ConfigError("trajectory gates must be > 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
    const bool frames = !cam1_frames.empty() && !cam2_frames.empty();
    const bool csvs = !cam1_detections.empty() && !cam2_detections.empty();
    if (!frames && !csvs)
      throw ConfigError("input: set cam1_frames+cam2_frames or cam1_detections+cam2_detections");
  }

  json to_json() const {
    json j;
    j["format_version"] = kConfigFormatVersion;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["rig"] = {{"separation_m", separation_m}, {"height_m", height_m}, {"fps", fps}};
    j["input"] = {{"cam1_frames", cam1_frames},
                  {"cam2_frames", cam2_frames},
                  {"cam1_detections", cam1_detections},
                  {"cam2_detections", cam2_detections}};
    j["detect"] = {{"threshold", threshold}, {"tau_s", tau_s}, {"blur_radius", blur_radius}};
    j["classify"] = {{"model", model_path}, {"min_prob", min_prob}};
    j["calibrate"] = {{"max_lag", max_lag},
                      {"trials", ransac_trials},
                      {"window", ransac_window},
                      {"clean_quantile", clean_quantile},
                      {"pairs_cap", pairs_cap}};
    j["match"] = {{"tol_deg", match_tol_deg},
                  {"residual_gate_m", residual_gate_m},
                  {"max_range_m", max_range_m},
                  {"assignment", assignment}};
    j["trajectory"] = {
        {"d_max_m", d_max_m}, {"dt_max_s", dt_max_s}, {"dr_max_m", dr_max_m}, {"raw_streaks", raw_streaks}};
    return j;
  }

  static RigConfig from_json(const json& j) {
    RigConfig c;
    try {
      if (j.contains("format_version") && j["format_version"].get<int>() != kConfigFormatVersion)
        throw ConfigError("unsupported config format_version");
      auto get = [&](const char* section, const char* key, auto& dst) {
        if (j.contains(section) && j[section].contains(key)) dst = j[section][key].get<std::decay_t<decltype(dst)>>();
      };
      if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
      if (j.contains("threads")) c.threads = j["threads"].get<int>();
      if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
      get("rig", "separation_m", c.separation_m);
      get("rig", "height_m", c.height_m);
      get("rig", "fps", c.fps);
      get("input", "cam1_frames", c.cam1_frames);
      get("input", "cam2_frames", c.cam2_frames);
      get("input", "cam1_detections", c.cam1_detections);
      get("input", "cam2_detections", c.cam2_detections);
      get("detect", "threshold", c.threshold);
      get("detect", "tau_s", c.tau_s);
      get("detect", "blur_radius", c.blur_radius);
      get("classify", "model", c.model_path);
      get("classify", "min_prob", c.min_prob);
      get("calibrate", "max_lag", c.max_lag);
      get("calibrate", "trials", c.ransac_trials);
      get("calibrate", "window", c.ransac_window);
      get("calibrate", "clean_quantile", c.clean_quantile);
      get("calibrate", "pairs_cap", c.pairs_cap);
      get("match", "tol_deg", c.match_tol_deg);
      get("match", "residual_gate_m", c.residual_gate_m);
      get("match", "max_range_m", c.max_range_m);
      get("match", "assignment", c.assignment);
      get("trajectory", "d_max_m", c.d_max_m);
      get("trajectory", "dt_max_s", c.dt_max_s);
      get("trajectory", "dr_max_m", c.dr_max_m);
      get("trajectory", "raw_streaks", c.raw_streaks);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
  }

  static RigConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }
};

// Output file names under out_dir.
namespace outfile {
inline constexpr const char* kDetections1 = "detections_cam1.csv";
inline constexpr const char* kDetections2 = "detections_cam2.csv";
inline constexpr const char* kFiltered1 = "filtered_cam1.csv";
inline constexpr const char* kFiltered2 = "filtered_cam2.csv";
inline constexpr const char* kCalibration = "calibration.json";
inline constexpr const char* kFlashesCsv = "flashes.csv";
inline constexpr const char* kFlashesPly = "flashes.ply";
inline constexpr const char* kTrajectories = "trajectories.csv";
inline constexpr const char* kTrajectorySummary = "trajectory_summary.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kManifest = "run_manifest.json";
}  // namespace outfile

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct FileRef {
  std::string path;
  std::string hash;
};

struct StageRecord {
  std::string name;
  bool skipped = false;
  double seconds = 0.0;
  std::vector<FileRef> inputs;
  std::vector<FileRef> outputs;
  std::string note;
};

struct RunManifest {
  json config_snapshot;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
  std::string calibration_status = "ok";  // ok | insufficient_data

  json to_json() const {
    json j;
    j["format_version"] = kManifestFormatVersion;
    j["seed"] = seed;
    j["calibration_status"] = calibration_status;
    j["config"] = config_snapshot;
    json st = json::array();
    for (const auto& s : stages) {
      json e;
      e["name"] = s.name;
      e["skipped"] = s.skipped;
      e["seconds"] = s.seconds;
      json ins = json::array(), outs = json::array();
      for (const auto& f : s.inputs) ins.push_back({{"path", f.path}, {"hash", f.hash}});
      for (const auto& f : s.outputs) outs.push_back({{"path", f.path}, {"hash", f.hash}});
      e["inputs"] = ins;
      e["outputs"] = outs;
      if (!s.note.empty()) e["note"] = s.note;
      st.push_back(e);
    }
    j["stages"] = st;
    return j;
  }
};

namespace detail {

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash_hex(const std::string& path) { return hex64(hash_file(path)); }

// Fingerprint of a frame directory: sorted (name, size) pairs. Cheap, catches
// added/removed/replaced frames without reading gigabytes.
inline std::string dir_fingerprint(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("frame directory not found: " + dir);
  std::vector<std::string> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file())
      entries.push_back(e.path().filename().string() + ":" + std::to_string(e.file_size()));
  std::sort(entries.begin(), entries.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& s : entries) h = fnv1a64(s.data(), s.size(), h);
  return hex64(h);
}

inline std::string params_fingerprint(const json& section) { return hex64(fnv1a64(section.dump())); }

// Previous manifest's stage records, for skip decisions.
inline std::optional<json> load_previous_manifest(const std::string& out_dir) {
  const auto path = (std::filesystem::path(out_dir) / outfile::kManifest).string();
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    json j;
    in >> j;
    if (j.value("format_version", -1) != kManifestFormatVersion) return std::nullopt;
    return j;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

inline bool can_skip(const std::optional<json>& prev, const std::string& name,
                     const std::vector<FileRef>& inputs, const std::vector<std::string>& outputs) {
  if (!prev) return false;
  for (const auto& stage : (*prev)["stages"]) {
    if (stage["name"].get<std::string>() != name) continue;
    // inputs must match what the previous run saw
    const auto& pin = stage["inputs"];
    if (pin.size() != inputs.size()) return false;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (pin[i]["path"].get<std::string>() != inputs[i].path) return false;
      if (pin[i]["hash"].get<std::string>() != inputs[i].hash) return false;
    }
    // recorded outputs must exist on disk with matching hashes
    const auto& pout = stage["outputs"];
    if (pout.size() != outputs.size()) return false;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const auto path = pout[i]["path"].get<std::string>();
      if (path != outputs[i]) return false;
      if (!std::filesystem::exists(path)) return false;
      if (file_hash_hex(path) != pout[i]["hash"].get<std::string>()) return false;
    }
    return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage bodies (each reads its inputs from disk and writes its outputs,
// so stages stay independently runnable and the pipeline resumable)
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<detect::Detection> load_stream(const std::string& path, bool scored) {
  if (!scored) return detect::read_detections_csv(path);
  std::vector<detect::Detection> out;
  for (const auto& s : classify::read_scored_csv(path)) out.push_back(s.detection);
  return out;
}

}  // namespace detail

struct RunPaths {
  std::string detections[2];
  std::string filtered[2];
  bool use_filtered = false;

  const std::string& stream(int cam) const { return use_filtered ? filtered[cam] : detections[cam]; }
};

// Executes detect -> classify-filter -> calibrate -> match/triangulate ->
// trajectorize, skipping stages whose inputs and outputs are unchanged.
inline RunManifest run(const RigConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const auto out = [&](const char* name) { return (fs::path(config.out_dir) / name).string(); };

  RunManifest manifest;
  manifest.config_snapshot = config.to_json();
  manifest.seed = config.seed;
  const auto prev = detail::load_previous_manifest(config.out_dir);
  const json cfg = manifest.config_snapshot;

  std::string current_stage;
  auto run_stage = [&](const std::string& name, std::vector<FileRef> inputs,
                       const std::vector<std::string>& outputs, auto&& body) {
    current_stage = name;
    StageRecord rec;
    rec.name = name;
    rec.inputs = std::move(inputs);
    if (detail::can_skip(prev, name, rec.inputs, outputs)) {
      rec.skipped = true;
      rec.note = "cache hit";
      for (const auto& o : outputs) rec.outputs.push_back({o, detail::file_hash_hex(o)});
      manifest.stages.push_back(std::move(rec));
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    body(rec);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& o : outputs) rec.outputs.push_back({o, detail::file_hash_hex(o)});
    manifest.stages.push_back(std::move(rec));
  };

  try {
    // --- detect (or ingest precomputed detection CSVs) ---
    const bool from_frames = !config.cam1_frames.empty();
    RunPaths paths;
    paths.detections[0] = out(outfile::kDetections1);
    paths.detections[1] = out(outfile::kDetections2);
    paths.filtered[0] = out(outfile::kFiltered1);
    paths.filtered[1] = out(outfile::kFiltered2);

    for (int cam = 0; cam < 2; ++cam) {
      const std::string name = "detect_cam" + std::to_string(cam + 1);
      if (from_frames) {
        const std::string frames_dir = cam == 0 ? config.cam1_frames : config.cam2_frames;
        run_stage(name,
                  {{frames_dir, detail::dir_fingerprint(frames_dir)},
                   {"<config:detect>", detail::params_fingerprint(cfg["detect"])}},
                  {paths.detections[cam]}, [&](StageRecord&) {
                    ImageDirSource src(frames_dir, config.fps);
                    detect::DetectParams dp{config.threshold, config.tau_s, config.blur_radius, true};
                    detect::write_detections_csv(paths.detections[cam], detect::run_detector(src, dp, cam + 1));
                  });
      } else {
        const std::string src = cam == 0 ? config.cam1_detections : config.cam2_detections;
        run_stage(name, {{src, detail::file_hash_hex(src)}}, {paths.detections[cam]}, [&](StageRecord&) {
          // normalize external CSVs through a parse/serialize round trip
          detect::write_detections_csv(paths.detections[cam], detect::read_detections_csv(src));
        });
      }
    }

    // --- classify-filter (only when a model is configured) ---
    paths.use_filtered = !config.model_path.empty();
    if (paths.use_filtered) {
      if (!from_frames)
        throw ConfigError("classify filtering needs frame input (patches are cut from frames)");
      for (int cam = 0; cam < 2; ++cam) {
        const std::string frames_dir = cam == 0 ? config.cam1_frames : config.cam2_frames;
        run_stage("classify_cam" + std::to_string(cam + 1),
                  {{paths.detections[cam], detail::file_hash_hex(paths.detections[cam])},
                   {config.model_path, detail::file_hash_hex(config.model_path)},
                   {"<config:classify>", detail::params_fingerprint(cfg["classify"])}},
                  {paths.filtered[cam]}, [&](StageRecord&) {
                    const auto model = classify::load_model(config.model_path);
                    ImageDirSource src(frames_dir, config.fps);
                    const auto dets = detect::read_detections_csv(paths.detections[cam]);
                    const auto scored = classify::filter_detections(dets, src, model);
                    classify::write_scored_csv(paths.filtered[cam], scored, config.min_prob);
                  });
      }
    }

    // --- calibrate ---
    const std::string cal_path = out(outfile::kCalibration);
    run_stage("calibrate",
              {{paths.stream(0), detail::file_hash_hex(paths.stream(0))},
               {paths.stream(1), detail::file_hash_hex(paths.stream(1))},
               {"<config:calibrate>", detail::params_fingerprint(cfg["calibrate"])},
               {"<config:seed>", detail::hex64(config.seed)}},
              {cal_path}, [&](StageRecord& rec) {
                const auto det1 = detail::load_stream(paths.stream(0), paths.use_filtered);
                const auto det2 = detail::load_stream(paths.stream(1), paths.use_filtered);
                calibrate::RigCalibration cal;
                try {
                  const auto n1 = calibrate::count_series(det1, 1);
                  const auto n2 = calibrate::count_series(det2, 2);
                  calibrate::RansacParams rp;
                  rp.trials = config.ransac_trials;
                  rp.window = config.ransac_window;
                  const int k_min = static_cast<int>(std::min(n1.size(), n2.size()));
                  rp.window = std::min(rp.window, k_min);
                  rp.max_lag = std::min(config.max_lag, std::max(1, rp.window - 1));
                  rp.clean_quantile = config.clean_quantile;
                  rp.seed = config.seed;
                  const auto temporal = calibrate::ransac_delay(n1, n2, rp);
                  const auto set = calibrate::build_calibration_set(det1, det2, temporal.delta_k,
                                                                    static_cast<std::size_t>(config.pairs_cap));
                  const auto est = calibrate::estimate_pose(set, geometry::CameraPose::identity());
                  cal.delta_k = temporal.delta_k;
                  cal.support = temporal.support;
                  cal.pose = est.pose;
                  cal.cost = est.cost;
                  cal.n_pairs = static_cast<std::int64_t>(set.size());
                  cal.converged = est.converged;
                  manifest.calibration_status = "ok";
                } catch (const DataError& e) {
                  // not enough signal to calibrate: a recorded outcome, not an abort
                  manifest.calibration_status = "insufficient_data";
                  rec.note = e.what();
                  cal.converged = false;
                  cal.n_pairs = 0;
                }
                calibrate::write_calibration(cal_path, cal);
              });

    // --- match + triangulate ---
    const std::string flashes_csv = out(outfile::kFlashesCsv);
    const std::string flashes_ply = out(outfile::kFlashesPly);
    run_stage("triangulate",
              {{paths.stream(0), detail::file_hash_hex(paths.stream(0))},
               {paths.stream(1), detail::file_hash_hex(paths.stream(1))},
               {cal_path, detail::file_hash_hex(cal_path)},
               {"<config:match>", detail::params_fingerprint(cfg["match"])},
               {"<config:rig>", detail::params_fingerprint(cfg["rig"])}},
              {flashes_csv, flashes_ply}, [&](StageRecord& rec) {
                std::vector<match::Flash3D> flashes;
                if (manifest.calibration_status == "ok") {
                  const auto cal = calibrate::read_calibration(cal_path);
                  const auto det1 = detail::load_stream(paths.stream(0), paths.use_filtered);
                  const auto det2 = detail::load_stream(paths.stream(1), paths.use_filtered);
                  match::MatchParams mp;
                  mp.tol_deg = config.match_tol_deg;
                  mp.assignment =
                      config.assignment == "hungarian" ? match::Assignment::kHungarian : match::Assignment::kMutualBest;
                  match::TriangulateParams tp;
                  tp.separation_m = config.separation_m;
                  tp.residual_gate_m = config.residual_gate_m;
                  tp.max_range_m = config.max_range_m;
                  match::TriangulationTally tally;
                  flashes = match::match_and_triangulate(det1, det2, cal.delta_k, cal.pose, mp, tp, &tally);
                  rec.note = "ok=" + std::to_string(tally.ok) + " degenerate=" + std::to_string(tally.degenerate) +
                             " behind=" + std::to_string(tally.behind_camera) +
                             " residual_gate=" + std::to_string(tally.residual_gate) +
                             " range_gate=" + std::to_string(tally.range_gate);
                } else {
                  rec.note = "skipped triangulation: calibration has insufficient data";
                }
                match::write_flashes_csv(flashes_csv, flashes);
                match::write_flashes_ply(flashes_ply, flashes);
              });

    // --- trajectorize ---
    const std::string traj_csv = out(outfile::kTrajectories);
    const std::string traj_summary = out(outfile::kTrajectorySummary);
    run_stage("trajectorize",
              {{flashes_csv, detail::file_hash_hex(flashes_csv)},
               {"<config:trajectory>", detail::params_fingerprint(cfg["trajectory"])}},
              {traj_csv, traj_summary}, [&](StageRecord&) {
                const auto flashes = match::read_flashes_csv(flashes_csv);
                trajectory::StreakParams sp{config.d_max_m, config.raw_streaks};
                const auto streaks = trajectory::build_streaks(flashes, sp);
                trajectory::LinkParams lp{config.dt_max_s, config.dr_max_m, config.fps};
                const auto trajectories = trajectory::link_trajectories(flashes, streaks, lp);
                trajectory::write_trajectories_csv(traj_csv, flashes, streaks, trajectories);
                std::ofstream summary(traj_summary);
                summary << trajectory::summary_json(flashes, streaks, trajectories, config.fps).dump(2) << "\n";
              });
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + current_stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericalError("stage " + current_stage + ": " + e.what());
  }

  std::ofstream mf(out(outfile::kManifest));
  mf << manifest.to_json().dump(2) << "\n";
  return manifest;
}

// ---------------------------------------------------------------------------
// Report: per-stage counts, calibration quality, per-frame count series
// (classifier-filtered vs unfiltered).
// ---------------------------------------------------------------------------

inline json build_report(const std::string& out_dir) {
  namespace fs = std::filesystem;
  const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  std::ifstream mf(path(outfile::kManifest));
  if (!mf) throw DataError("no run manifest under " + out_dir + "; run the pipeline first");
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw DataError("run manifest is not valid JSON: " + e.what());
  }

  json rep;
  rep["out_dir"] = out_dir;
  rep["seed"] = manifest["seed"];
  const std::string cal_status = manifest.value("calibration_status", "ok");

  json counts;
  const auto det1 = detect::read_detections_csv(path(outfile::kDetections1));
  const auto det2 = detect::read_detections_csv(path(outfile::kDetections2));
  counts["detections_cam1"] = det1.size();
  counts["detections_cam2"] = det2.size();
  const bool filtered = fs::exists(path(outfile::kFiltered1));
  std::vector<classify::ScoredDetection> f1, f2;
  if (filtered) {
    f1 = classify::read_scored_csv(path(outfile::kFiltered1));
    f2 = classify::read_scored_csv(path(outfile::kFiltered2));
    counts["filtered_cam1"] = f1.size();
    counts["filtered_cam2"] = f2.size();
  }
  const auto flashes = match::read_flashes_csv(path(outfile::kFlashesCsv));
  counts["flashes_3d"] = flashes.size();
  std::ifstream ts(path(outfile::kTrajectorySummary));
  if (ts) {
    json summary;
    ts >> summary;
    counts["streaks"] = summary["n_streaks"];
    counts["trajectories"] = summary["n_trajectories"];
  }
  rep["counts"] = counts;

  json cal;
  cal["status"] = cal_status;
  if (cal_status == "ok") {
    const auto c = calibrate::read_calibration(path(outfile::kCalibration));
    cal["delta_k"] = c.delta_k;
    cal["support"] = c.support;
    cal["pose_cost"] = c.cost;
    cal["n_pairs"] = c.n_pairs;
    cal["converged"] = c.converged;
  }
  rep["calibration"] = cal;

  // Fig.-style per-frame series for camera 1: raw ABS counts vs filtered
  std::int64_t max_frame = -1;
  for (const auto& d : det1) max_frame = std::max(max_frame, d.frame);
  std::vector<std::int64_t> unf(static_cast<std::size_t>(max_frame + 1), 0), fil;
  for (const auto& d : det1) ++unf[static_cast<std::size_t>(d.frame)];
  rep["per_frame_cam1"] = {{"unfiltered", unf}};
  if (filtered) {
    fil.assign(static_cast<std::size_t>(max_frame + 1), 0);
    for (const auto& s : f1)
      if (s.detection.frame <= max_frame) ++fil[static_cast<std::size_t>(s.detection.frame)];
    rep["per_frame_cam1"]["filtered"] = fil;
  }
  return rep;
}

inline std::string report_text(const json& rep) {
  std::string s;
  s += "run report (" + rep["out_dir"].get<std::string>() + ")\n";
  const auto& counts = rep["counts"];
  for (const auto& [key, value] : counts.items()) s += "  " + key + ": " + value.dump() + "\n";
  const auto& cal = rep["calibration"];
  s += "  calibration: " + cal["status"].get<std::string>();
  if (cal["status"] == "ok") {
    s += " (delta_k " + cal["delta_k"].dump() + ", support " + cal["support"].dump() + ", pose cost " +
         cal["pose_cost"].dump() + ", pairs " + cal["n_pairs"].dump() + ")";
  }
  s += "\n";
  return s;
}

}  // namespace firefly::pipeline
