#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include "firefly3d/csv.hpp"
#include "firefly3d/errors.hpp"
#include "firefly3d/geometry.hpp"
#include "firefly3d/image.hpp"
#include "firefly3d/image_io.hpp"
#include "firefly3d/util.hpp"

namespace firefly::detect {

// One bright-blob detection. w*,h* (brightest pixel) are kept in memory for
// patch seeding; the CSV schema carries the centroid only.
struct Detection {
  int camera = 1;
  std::int64_t frame = 0;
  double w = 0.0, h = 0.0;     // intensity-weighted centroid, pixels
  int w_star = 0, h_star = 0;  // brightest pixel of the blob
  std::int64_t area = 0;       // component size, pixels^2
  double peak = 0.0;           // peak foreground intensity, 0-255
  geometry::SphericalAngles angles;
};

// Connected component of the thresholded foreground, before frame/camera
// annotation.
struct Blob {
  double w = 0.0, h = 0.0;
  int w_star = 0, h_star = 0;
  std::int64_t area = 0;
  double peak = 0.0;
};

enum class PatchLabel { kArtifact = 0, kFlash = 1, kUnlabeled = 2 };

inline constexpr int kPatchSize = 65;
inline constexpr int kPatchCenter = kPatchSize / 2;  // 32 zero-based == the paper's (33,33)
inline constexpr int kPatchSearchWindow = 15;        // brightest-pixel search around the seed

struct Patch {
  ImageU8 pixels;  // 65x65, 1 or 3 channels
  std::int64_t frame = 0;
  int center_w = 0, center_h = 0;  // absolute coordinates of the patch center
  PatchLabel label = PatchLabel::kUnlabeled;
};

// ---------------------------------------------------------------------------
// Adaptive background: exact boxcar mean over the last `window` frames,
// never including the frame being queried. Push the current frame only
// after computing its foreground.
// ---------------------------------------------------------------------------
class BackgroundModel {
 public:
  explicit BackgroundModel(int window_frames) : window_(window_frames) {
    if (window_ < 1) throw ConfigError("background window must be >= 1 frame");
  }

  static BackgroundModel from_seconds(double tau_s, double fps) {
    return BackgroundModel(static_cast<int>(std::ceil(tau_s * fps)));
  }

  int window() const { return window_; }
  int count() const { return static_cast<int>(ring_.size()); }

  void push(const ImageF& gray_frame) {
    ImageU8 q(gray_frame.width, gray_frame.height, 1);
    for (std::size_t i = 0; i < gray_frame.data.size(); ++i) q.data[i] = clamp_u8(gray_frame.data[i]);
    push(q);
  }

  void push(const ImageU8& gray_frame) {
    if (gray_frame.channels != 1) throw std::domain_error("background model expects grayscale frames");
    if (ring_.empty()) {
      sum_ = std::vector<std::uint32_t>(gray_frame.pixel_count(), 0);
      width_ = gray_frame.width;
      height_ = gray_frame.height;
    } else if (gray_frame.width != width_ || gray_frame.height != height_) {
      throw DataError("frame dimensions changed mid-stream: " + std::to_string(gray_frame.width) + "x" +
                      std::to_string(gray_frame.height) + " vs model " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    }
    ring_.push_back(gray_frame);
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += gray_frame.data[i];
    if (static_cast<int>(ring_.size()) > window_) {
      const ImageU8& old = ring_.front();
      for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] -= old.data[i];
      ring_.pop_front();
    }
  }

  // Mean of the frames currently in the window.
  ImageF mean() const {
    if (ring_.empty()) throw std::logic_error("background model has no frames");
    ImageF out(width_, height_, 1);
    const double inv = 1.0 / static_cast<double>(ring_.size());
    for (std::size_t i = 0; i < sum_.size(); ++i) out.data[i] = sum_[i] * inv;
    return out;
  }

 private:
  int window_;
  int width_ = 0, height_ = 0;
  std::deque<ImageU8> ring_;
  std::vector<std::uint32_t> sum_;
};

// F = max(f - B, 0), elementwise. Values stay in [0, 255].
inline ImageF foreground(const ImageF& gray_frame, const BackgroundModel& model) {
  if (model.count() < 1) throw std::logic_error("foreground: background model is empty");
  const ImageF bg = model.mean();
  if (gray_frame.width != bg.width || gray_frame.height != bg.height)
    throw DataError("foreground: frame does not match background dimensions");
  ImageF out(gray_frame.width, gray_frame.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::max(gray_frame.data[i] - bg.data[i], 0.0);
  return out;
}

// Gaussian blur, sigma = radius, truncated at 3 sigma. radius 0 is the
// identity. Horizontal borders wrap (equirectangular), vertical replicate.
inline ImageF blur(const ImageF& img, double radius = 1.0) {
  if (radius < 0.0) throw std::domain_error("blur radius must be >= 0");
  if (radius == 0.0) return img;
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * radius)));
  std::vector<double> kernel(2 * half + 1);
  double norm = 0.0;
  for (int i = -half; i <= half; ++i) {
    kernel[i + half] = std::exp(-0.5 * (i * i) / (radius * radius));
    norm += kernel[i + half];
  }
  for (auto& k : kernel) k /= norm;

  ImageF tmp(img.width, img.height, 1);
  for (int h = 0; h < img.height; ++h) {
    for (int w = 0; w < img.width; ++w) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) acc += kernel[i + half] * img.at(wrap_w(w + i, img.width), h);
      tmp.at(w, h) = acc;
    }
  }
  ImageF out(img.width, img.height, 1);
  for (int h = 0; h < img.height; ++h) {
    for (int w = 0; w < img.width; ++w) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) acc += kernel[i + half] * tmp.at(w, clamp_h(h + i, img.height));
      out.at(w, h) = acc;
    }
  }
  return out;
}

// 8-connected components of {F >= threshold}. Per component: intensity-weighted
// centroid, area, peak value, and brightest pixel (first in scan order on ties).
// Components are emitted in scan order of their first pixel.
inline std::vector<Blob> detect_blobs(const ImageF& fg, double threshold) {
  if (threshold <= 0.0) throw std::domain_error("detection threshold must be > 0");
  std::vector<Blob> blobs;
  std::vector<std::uint8_t> visited(fg.pixel_count(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int h0 = 0; h0 < fg.height; ++h0) {
    for (int w0 = 0; w0 < fg.width; ++w0) {
      const std::size_t idx0 = static_cast<std::size_t>(h0) * fg.width + w0;
      if (visited[idx0] || fg.data[idx0] < threshold) continue;
      Blob b;
      double mass = 0.0, mw = 0.0, mh = 0.0;
      stack.clear();
      stack.emplace_back(w0, h0);
      visited[idx0] = 1;
      while (!stack.empty()) {
        const auto [w, h] = stack.back();
        stack.pop_back();
        const double v = fg.at(w, h);
        mass += v;
        mw += v * w;
        mh += v * h;
        ++b.area;
        if (v > b.peak) {
          b.peak = v;
          b.w_star = w;
          b.h_star = h;
        }
        for (int dh = -1; dh <= 1; ++dh) {
          for (int dw = -1; dw <= 1; ++dw) {
            if (dw == 0 && dh == 0) continue;
            const int wn = w + dw, hn = h + dh;
            if (wn < 0 || wn >= fg.width || hn < 0 || hn >= fg.height) continue;
            const std::size_t idx = static_cast<std::size_t>(hn) * fg.width + wn;
            if (visited[idx] || fg.data[idx] < threshold) continue;
            visited[idx] = 1;
            stack.emplace_back(wn, hn);
          }
        }
      }
      b.w = mw / mass;
      b.h = mh / mass;
      blobs.push_back(b);
    }
  }
  return blobs;
}

// ---------------------------------------------------------------------------
// 65x65 patch extraction: find the brightest pixel in a 15x15 window around
// the seed, then re-center iteratively until the patch maximum sits at the
// center (ties allowed). Horizontal borders wrap, vertical replicate.
// ---------------------------------------------------------------------------

namespace detail {
inline double pixel_luma(const ImageU8& img, int w, int h) {
  if (img.channels == 1) return img.at(w, h);
  return 0.299 * img.at(w, h, 0) + 0.587 * img.at(w, h, 1) + 0.114 * img.at(w, h, 2);
}

inline ImageU8 crop_patch(const ImageU8& frame, int cw, int ch) {
  ImageU8 p(kPatchSize, kPatchSize, frame.channels);
  for (int dy = -kPatchCenter; dy <= kPatchCenter; ++dy) {
    const int h = clamp_h(ch + dy, frame.height);
    for (int dx = -kPatchCenter; dx <= kPatchCenter; ++dx) {
      const int w = wrap_w(cw + dx, frame.width);
      for (int c = 0; c < frame.channels; ++c)
        p.at(dx + kPatchCenter, dy + kPatchCenter, c) = frame.at(w, h, c);
    }
  }
  return p;
}
}  // namespace detail

inline Patch extract_patch(const ImageU8& frame, int seed_w, int seed_h, std::int64_t frame_index = 0) {
  if (frame.width < kPatchSize || frame.height < kPatchSize)
    throw std::domain_error("frame smaller than the patch size");
  // initial search window around the seed
  int cw = wrap_w(seed_w, frame.width);
  int ch = clamp_h(seed_h, frame.height);
  double best = -1.0;
  const int sh = kPatchSearchWindow / 2;
  for (int dy = -sh; dy <= sh; ++dy) {
    const int h = clamp_h(seed_h + dy, frame.height);
    for (int dx = -sh; dx <= sh; ++dx) {
      const int w = wrap_w(seed_w + dx, frame.width);
      const double v = detail::pixel_luma(frame, w, h);
      if (v > best) {
        best = v;
        cw = w;
        ch = h;
      }
    }
  }
  // hop to the patch maximum until the center is (one of) the brightest
  for (int iter = 0; iter < 100; ++iter) {
    double max_v = -1.0;
    int mw = cw, mh = ch;
    for (int dy = -kPatchCenter; dy <= kPatchCenter; ++dy) {
      const int h = clamp_h(ch + dy, frame.height);
      for (int dx = -kPatchCenter; dx <= kPatchCenter; ++dx) {
        const int w = wrap_w(cw + dx, frame.width);
        const double v = detail::pixel_luma(frame, w, h);
        if (v > max_v) {
          max_v = v;
          mw = w;
          mh = h;
        }
      }
    }
    if (max_v <= detail::pixel_luma(frame, cw, ch)) break;
    cw = mw;
    ch = mh;
  }
  Patch p;
  p.pixels = detail::crop_patch(frame, cw, ch);
  p.frame = frame_index;
  p.center_w = cw;
  p.center_h = ch;
  return p;
}

inline bool patch_center_is_brightest(const Patch& p) {
  double max_v = -1.0;
  for (int h = 0; h < kPatchSize; ++h)
    for (int w = 0; w < kPatchSize; ++w) max_v = std::max(max_v, detail::pixel_luma(p.pixels, w, h));
  return detail::pixel_luma(p.pixels, kPatchCenter, kPatchCenter) >= max_v;
}

inline std::string patch_label_dir(PatchLabel label) {
  switch (label) {
    case PatchLabel::kFlash: return "flash";
    case PatchLabel::kArtifact: return "artifact";
    default: return "unlabeled";
  }
}

// Writes <root>/<label>/f<frame>_w<center_w>_h<center_h>.png
inline std::string write_patch(const std::string& root, const Patch& p) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(root) / patch_label_dir(p.label);
  fs::create_directories(dir);
  char name[64];
  std::snprintf(name, sizeof(name), "f%06lld_w%05d_h%05d.png", static_cast<long long>(p.frame), p.center_w,
                p.center_h);
  const std::string path = (dir / name).string();
  write_png(path, p.pixels);
  return path;
}

// ---------------------------------------------------------------------------
// Detection stream driver + CSV round trip
// ---------------------------------------------------------------------------

struct DetectParams {
  double threshold = 25.0;  // on the blurred grayscale foreground, 0-255
  double tau_s = 2.0;       // background window, seconds
  double blur_radius = 1.0;
  bool require_equirect = true;
};

inline Detection blob_to_detection(const Blob& b, int camera, std::int64_t frame,
                                   const geometry::EquirectDims& dims) {
  Detection d;
  d.camera = camera;
  d.frame = frame;
  d.w = b.w;
  d.h = b.h;
  d.w_star = b.w_star;
  d.h_star = b.h_star;
  d.area = b.area;
  d.peak = b.peak;
  d.angles = geometry::pixel_to_angles(b.w, b.h, dims);
  return d;
}

// Sequential pass over a frame stream: background -> foreground -> blur ->
// threshold -> blobs. Frame 0 only primes the background.
inline std::vector<Detection> run_detector(const FrameSource& frames, const DetectParams& params,
                                           int camera = 1) {
  BackgroundModel model = BackgroundModel::from_seconds(params.tau_s, frames.fps());
  std::vector<Detection> out;
  const std::size_t n = frames.count();
  for (std::size_t k = 0; k < n; ++k) {
    const ImageU8 raw = frames.frame(k);
    geometry::EquirectDims dims{raw.width, raw.height};
    if (params.require_equirect && !dims.valid())
      throw DataError("frame " + std::to_string(k) + " is not equirectangular (" + std::to_string(raw.width) +
                      "x" + std::to_string(raw.height) + ")");
    const ImageF gray = luma(raw);
    if (model.count() > 0) {
      const ImageF fg = blur(foreground(gray, model), params.blur_radius);
      for (const Blob& b : detect_blobs(fg, params.threshold))
        out.push_back(blob_to_detection(b, camera, static_cast<std::int64_t>(k), dims));
    }
    model.push(gray);
  }
  return out;
}

inline constexpr const char* kDetectionsCsvHeader = "camera,frame,w,h,theta_deg,phi_deg,area,peak";

inline void write_detections_csv(const std::string& path, const std::vector<Detection>& dets) {
  csv::Writer out(path, kDetectionsCsvHeader);
  for (const auto& d : dets)
    out.row({std::to_string(d.camera), std::to_string(d.frame), format_double(d.w), format_double(d.h),
             format_double(d.angles.theta_deg), format_double(d.angles.phi_deg), std::to_string(d.area),
             format_double(d.peak)});
}

inline std::vector<Detection> read_detections_csv(const std::string& path) {
  csv::Reader in(path, kDetectionsCsvHeader);
  std::vector<Detection> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    Detection d;
    d.camera = static_cast<int>(in.integer(i, 0));
    d.frame = in.integer(i, 1);
    d.w = in.num(i, 2);
    d.h = in.num(i, 3);
    d.angles.theta_deg = in.num(i, 4);
    d.angles.phi_deg = in.num(i, 5);
    d.area = in.integer(i, 6);
    d.peak = in.num(i, 7);
    d.w_star = static_cast<int>(std::lround(d.w));
    d.h_star = static_cast<int>(std::lround(d.h));
    out.push_back(d);
  }
  return out;
}

}  // namespace firefly::detect
