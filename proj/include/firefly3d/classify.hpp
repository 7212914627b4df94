#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "firefly3d/detect.hpp"
#include "firefly3d/errors.hpp"
#include "firefly3d/image_io.hpp"
#include "firefly3d/random.hpp"

namespace firefly::classify {

using detect::Patch;
using detect::PatchLabel;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Engineered features over a 65x65 patch. The cues: a flash is a compact,
// isolated bright spot; foliage and other clutter put many secondary maxima
// and bright structure in the surround.
// ---------------------------------------------------------------------------

inline constexpr int kCenterBox = 9;  // central 9x9 box

inline std::vector<std::string> feature_names(bool use_chroma) {
  std::vector<std::string> names = {
      "center_mean",     "annulus_mean_5_10", "annulus_mean_10_20", "annulus_mean_20_32",
      "contrast_5_10",   "contrast_10_20",    "contrast_20_32",     "clutter_maxima",
  };
  if (use_chroma) {
    names.insert(names.end(), {"center_r", "center_g", "center_b", "chroma_green"});
  }
  names.push_back("radial_slope");
  return names;
}

inline std::vector<double> featurize(const Patch& patch, bool use_chroma = true) {
  const ImageU8& img = patch.pixels;
  if (img.width != detect::kPatchSize || img.height != detect::kPatchSize)
    throw std::domain_error("featurize: patch must be 65x65");
  const int c0 = detect::kPatchCenter;
  ImageF gray = luma(img);

  const int half_box = kCenterBox / 2;
  double center_sum = 0.0;
  double rgb_sum[3] = {0, 0, 0};
  int center_n = 0;
  for (int h = c0 - half_box; h <= c0 + half_box; ++h) {
    for (int w = c0 - half_box; w <= c0 + half_box; ++w) {
      center_sum += gray.at(w, h);
      if (img.channels == 3) {
        for (int c = 0; c < 3; ++c) rgb_sum[c] += img.at(w, h, c);
      } else {
        for (int c = 0; c < 3; ++c) rgb_sum[c] += img.at(w, h);
      }
      ++center_n;
    }
  }
  const double center_mean = center_sum / center_n;

  // annulus means by radius band
  const double bands[3][2] = {{5, 10}, {10, 20}, {20, 32}};
  double band_sum[3] = {0, 0, 0};
  int band_n[3] = {0, 0, 0};
  // ring profile for the radial slope
  double ring_sum[detect::kPatchCenter + 1] = {};
  int ring_n[detect::kPatchCenter + 1] = {};
  for (int h = 0; h < img.height; ++h) {
    for (int w = 0; w < img.width; ++w) {
      const double r = std::hypot(w - c0, h - c0);
      const double v = gray.at(w, h);
      for (int b = 0; b < 3; ++b) {
        if (r >= bands[b][0] && r < bands[b][1] + (b == 2 ? 1e-9 : 0.0)) {
          band_sum[b] += v;
          ++band_n[b];
        }
      }
      const int ri = static_cast<int>(std::lround(r));
      if (ri <= detect::kPatchCenter) {
        ring_sum[ri] += v;
        ++ring_n[ri];
      }
    }
  }
  double annulus[3];
  for (int b = 0; b < 3; ++b) annulus[b] = band_n[b] ? band_sum[b] / band_n[b] : 0.0;

  // strict local maxima above half the center peak, outside the central box
  const double center_peak = gray.at(c0, c0);
  int clutter = 0;
  for (int h = 1; h < img.height - 1; ++h) {
    for (int w = 1; w < img.width - 1; ++w) {
      if (std::abs(w - c0) <= half_box && std::abs(h - c0) <= half_box) continue;
      const double v = gray.at(w, h);
      if (v <= 0.5 * center_peak) continue;
      bool is_max = true;
      for (int dh = -1; dh <= 1 && is_max; ++dh)
        for (int dw = -1; dw <= 1; ++dw) {
          if (dw == 0 && dh == 0) continue;
          if (gray.at(w + dw, h + dh) >= v) {
            is_max = false;
            break;
          }
        }
      if (is_max) ++clutter;
    }
  }

  // OLS slope of ring mean vs radius
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int nr = 0;
  for (int r = 0; r <= detect::kPatchCenter; ++r) {
    if (!ring_n[r]) continue;
    const double y = ring_sum[r] / ring_n[r];
    sx += r;
    sy += y;
    sxx += static_cast<double>(r) * r;
    sxy += r * y;
    ++nr;
  }
  const double denom = nr * sxx - sx * sx;
  const double radial_slope = denom != 0.0 ? (nr * sxy - sx * sy) / denom : 0.0;

  std::vector<double> f = {
      center_mean,
      annulus[0],
      annulus[1],
      annulus[2],
      (center_mean + 1.0) / (annulus[0] + 1.0),
      (center_mean + 1.0) / (annulus[1] + 1.0),
      (center_mean + 1.0) / (annulus[2] + 1.0),
      static_cast<double>(clutter),
  };
  if (use_chroma) {
    const double r = rgb_sum[0] / center_n, g = rgb_sum[1] / center_n, b = rgb_sum[2] / center_n;
    f.insert(f.end(), {r, g, b, g - 0.5 * (r + b)});
  }
  f.push_back(radial_slope);
  return f;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct PatchDataset {
  std::vector<Patch> patches;
  std::vector<int> labels;  // flash = 1, artifact = 0

  std::size_t size() const { return patches.size(); }
  void add(Patch p, int label) {
    p.label = label ? PatchLabel::kFlash : PatchLabel::kArtifact;
    patches.push_back(std::move(p));
    labels.push_back(label);
  }
};

// Reads the on-disk layout written by detect::write_patch: <root>/flash/*.png
// and <root>/artifact/*.png, in sorted filename order.
inline PatchDataset load_patch_dataset(const std::string& root) {
  namespace fs = std::filesystem;
  PatchDataset ds;
  for (const auto& [sub, label] : std::vector<std::pair<std::string, int>>{{"flash", 1}, {"artifact", 0}}) {
    const fs::path dir = fs::path(root) / sub;
    if (!fs::is_directory(dir)) continue;
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
      Patch patch;
      patch.pixels = read_png(p);
      if (patch.pixels.width != detect::kPatchSize || patch.pixels.height != detect::kPatchSize)
        throw DataError("patch is not 65x65: " + p);
      ds.add(std::move(patch), label);
    }
  }
  if (ds.size() == 0) throw DataError("no patches under " + root + " (expected flash/ and artifact/ PNGs)");
  return ds;
}

inline std::pair<PatchDataset, PatchDataset> split_dataset(const PatchDataset& ds, double train_fraction,
                                                           std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(train_fraction * ds.size());
  PatchDataset train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_train ? train : val;
    dst.add(ds.patches[order[i]], ds.labels[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// Logistic regression over standardized features
// ---------------------------------------------------------------------------

struct TrainParams {
  double learning_rate = 0.5;
  int epochs = 400;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  bool use_chroma = true;
};

struct BaselineModel {
  bool trained = false;
  bool use_chroma = true;
  std::vector<std::string> features;
  std::vector<double> mean;    // per-feature standardization mean
  std::vector<double> stddev;  // 0 marks a dropped (zero-variance) feature
  std::vector<double> weights;
  double bias = 0.0;

  std::vector<double> standardize(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = stddev[i] > 0.0 ? (x[i] - mean[i]) / stddev[i] : 0.0;
    return out;
  }
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Weighted logistic loss with L2 on the weights (not the bias), plus its
// analytic gradient. Kept standalone so tests can difference it numerically.
struct LogisticObjective {
  const std::vector<std::vector<double>>& x;  // standardized features
  const std::vector<int>& y;
  const std::vector<double>& sample_weight;
  double l2 = 0.0;

  double loss(const std::vector<double>& w, double b) const {
    double total = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = b;
      for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[i][j];
      // log(1+exp(-|z|)) form avoids overflow
      const double zl = y[i] ? z : -z;
      total += sample_weight[i] * (std::log1p(std::exp(-std::abs(zl))) + std::max(-zl, 0.0));
      wsum += sample_weight[i];
    }
    double reg = 0.0;
    for (double wj : w) reg += wj * wj;
    return total / wsum + 0.5 * l2 * reg;
  }

  void gradient(const std::vector<double>& w, double b, std::vector<double>& grad_w, double& grad_b) const {
    grad_w.assign(w.size(), 0.0);
    grad_b = 0.0;
    double wsum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = b;
      for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * x[i][j];
      const double err = sample_weight[i] * (sigmoid(z) - y[i]);
      for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] += err * x[i][j];
      grad_b += err;
      wsum += sample_weight[i];
    }
    for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] = grad_w[j] / wsum + l2 * w[j];
    grad_b /= wsum;
  }
};

inline BaselineModel train(const PatchDataset& ds, const TrainParams& params = {}) {
  const std::size_t n = ds.size();
  std::size_t n_pos = 0;
  for (int y : ds.labels) n_pos += y;
  const std::size_t n_neg = n - n_pos;
  if (n_pos < 2 || n_neg < 2) throw DataError("training needs >= 2 examples of each class (got " +
                                              std::to_string(n_pos) + " flash, " + std::to_string(n_neg) +
                                              " artifact)");

  std::vector<std::vector<double>> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = featurize(ds.patches[i], params.use_chroma);
  const std::size_t dim = raw[0].size();

  BaselineModel model;
  model.use_chroma = params.use_chroma;
  model.features = feature_names(params.use_chroma);
  model.mean.assign(dim, 0.0);
  model.stddev.assign(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    double s = 0.0;
    for (const auto& r : raw) s += r[j];
    model.mean[j] = s / n;
    double v = 0.0;
    for (const auto& r : raw) v += (r[j] - model.mean[j]) * (r[j] - model.mean[j]);
    const double sd = std::sqrt(v / n);
    model.stddev[j] = sd > 1e-12 ? sd : 0.0;  // zero-variance features are dropped
  }

  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = model.standardize(raw[i]);

  // inverse-frequency class weights
  std::vector<double> sw(n);
  for (std::size_t i = 0; i < n; ++i)
    sw[i] = ds.labels[i] ? static_cast<double>(n) / (2.0 * n_pos) : static_cast<double>(n) / (2.0 * n_neg);

  LogisticObjective obj{x, ds.labels, sw, params.l2};
  std::vector<double> w(dim, 0.0), grad_w;
  double b = 0.0, grad_b = 0.0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    obj.gradient(w, b, grad_w, grad_b);
    for (std::size_t j = 0; j < dim; ++j) w[j] -= params.learning_rate * grad_w[j];
    b -= params.learning_rate * grad_b;
    if (!std::isfinite(b)) throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                                                " (NaN loss); lower the learning rate");
  }
  const double final_loss = obj.loss(w, b);
  if (!std::isfinite(final_loss)) throw NumericalError("training produced a non-finite loss");

  model.weights = std::move(w);
  model.bias = b;
  model.trained = true;
  return model;
}

struct Prediction {
  double probability = 0.0;
  int label = 0;  // at threshold 0.5
};

inline Prediction predict(const BaselineModel& model, const Patch& patch) {
  if (!model.trained) throw std::logic_error("predict: model is untrained");
  const auto x = model.standardize(featurize(patch, model.use_chroma));
  double z = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += model.weights[j] * x[j];
  const double p = sigmoid(z);
  return {p, p >= 0.5 ? 1 : 0};
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct ClassifierReport {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  // confusion[actual][predicted]
  std::int64_t confusion[2][2] = {{0, 0}, {0, 0}};
  std::vector<std::pair<double, double>> roc;  // (fpr, tpr) per threshold
  std::vector<double> probabilities;           // per example, dataset order

  json to_json() const {
    json j;
    j["accuracy"] = accuracy;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["confusion"] = {{"tn", confusion[0][0]}, {"fp", confusion[0][1]},
                      {"fn", confusion[1][0]}, {"tp", confusion[1][1]}};
    json pts = json::array();
    for (auto [fpr, tpr] : roc) pts.push_back({fpr, tpr});
    j["roc"] = pts;
    return j;
  }
};

inline ClassifierReport evaluate(const BaselineModel& model, const PatchDataset& ds) {
  if (ds.size() == 0) throw DataError("evaluate: empty dataset");
  ClassifierReport rep;
  rep.probabilities.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto pred = predict(model, ds.patches[i]);
    rep.probabilities.push_back(pred.probability);
    ++rep.confusion[ds.labels[i]][pred.label];
  }
  const double tp = rep.confusion[1][1], fp = rep.confusion[0][1];
  const double fn = rep.confusion[1][0], tn = rep.confusion[0][0];
  rep.accuracy = (tp + tn) / static_cast<double>(ds.size());
  rep.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  rep.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  rep.f1 = (rep.precision + rep.recall) > 0 ? 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
                                            : 0.0;
  // ROC over the observed probability thresholds
  std::vector<double> thresholds = rep.probabilities;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double n_pos = tp + fn, n_neg = tn + fp;
  rep.roc.emplace_back(1.0, 1.0);
  for (double t : thresholds) {
    double tpr = 0, fpr = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (rep.probabilities[i] >= t) (ds.labels[i] ? tpr : fpr) += 1.0;
    }
    rep.roc.emplace_back(n_neg > 0 ? fpr / n_neg : 0.0, n_pos > 0 ? tpr / n_pos : 0.0);
  }
  rep.roc.emplace_back(0.0, 0.0);
  return rep;
}

// ---------------------------------------------------------------------------
// Detection filtering (the ABS-then-classify stage)
// ---------------------------------------------------------------------------

struct ScoredDetection {
  detect::Detection detection;
  double probability = 0.0;
};

// Annotates every detection with its flash probability by extracting the
// 65x65 patch at the detection's brightest pixel. Frames are loaded once
// each; detections may arrive in any order.
inline std::vector<ScoredDetection> filter_detections(const std::vector<detect::Detection>& dets,
                                                      const FrameSource& frames, const BaselineModel& model) {
  std::vector<ScoredDetection> out;
  out.reserve(dets.size());
  std::map<std::int64_t, std::vector<std::size_t>> by_frame;
  for (std::size_t i = 0; i < dets.size(); ++i) by_frame[dets[i].frame].push_back(i);
  std::vector<double> probs(dets.size(), 0.0);
  for (const auto& [frame_idx, indices] : by_frame) {
    if (frame_idx < 0 || static_cast<std::size_t>(frame_idx) >= frames.count())
      throw DataError("filter_detections: missing frame " + std::to_string(frame_idx));
    const ImageU8 img = frames.frame(static_cast<std::size_t>(frame_idx));
    for (std::size_t i : indices) {
      const Patch p = detect::extract_patch(img, dets[i].w_star, dets[i].h_star, frame_idx);
      probs[i] = predict(model, p).probability;
    }
  }
  for (std::size_t i = 0; i < dets.size(); ++i) out.push_back({dets[i], probs[i]});
  return out;
}

inline constexpr const char* kScoredCsvHeader = "camera,frame,w,h,theta_deg,phi_deg,area,peak,prob";

inline void write_scored_csv(const std::string& path, const std::vector<ScoredDetection>& scored,
                             double min_prob = 0.0) {
  csv::Writer out(path, kScoredCsvHeader);
  for (const auto& s : scored) {
    if (s.probability < min_prob) continue;
    const auto& d = s.detection;
    out.row({std::to_string(d.camera), std::to_string(d.frame), format_double(d.w), format_double(d.h),
             format_double(d.angles.theta_deg), format_double(d.angles.phi_deg), std::to_string(d.area),
             format_double(d.peak), format_double(s.probability)});
  }
}

inline std::vector<ScoredDetection> read_scored_csv(const std::string& path) {
  csv::Reader in(path, kScoredCsvHeader);
  std::vector<ScoredDetection> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    ScoredDetection s;
    s.detection.camera = static_cast<int>(in.integer(i, 0));
    s.detection.frame = in.integer(i, 1);
    s.detection.w = in.num(i, 2);
    s.detection.h = in.num(i, 3);
    s.detection.angles.theta_deg = in.num(i, 4);
    s.detection.angles.phi_deg = in.num(i, 5);
    s.detection.area = in.integer(i, 6);
    s.detection.peak = in.num(i, 7);
    s.probability = in.num(i, 8);
    s.detection.w_star = static_cast<int>(std::lround(s.detection.w));
    s.detection.h_star = static_cast<int>(std::lround(s.detection.h));
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model persistence: versioned JSON, loadable from any language.
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

inline void save_model(const std::string& path, const BaselineModel& model) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["type"] = "logistic_regression";
  j["use_chroma"] = model.use_chroma;
  j["features"] = model.features;
  j["standardization"] = {{"mean", model.mean}, {"stddev", model.stddev}};
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model: " + path);
  out << j.dump(2) << "\n";
}

inline BaselineModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model " + path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != kModelFormatVersion)
    throw DataError("model " + path + ": unsupported format version");
  BaselineModel m;
  m.use_chroma = j["use_chroma"].get<bool>();
  m.features = j["features"].get<std::vector<std::string>>();
  m.mean = j["standardization"]["mean"].get<std::vector<double>>();
  m.stddev = j["standardization"]["stddev"].get<std::vector<double>>();
  m.weights = j["weights"].get<std::vector<double>>();
  m.bias = j["bias"].get<double>();
  if (m.features.size() != m.weights.size() || m.mean.size() != m.weights.size() ||
      m.stddev.size() != m.weights.size())
    throw DataError("model " + path + ": inconsistent array lengths");
  m.trained = true;
  return m;
}

}  // namespace firefly::classify
