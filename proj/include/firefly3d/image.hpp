#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace firefly {

// Row-major, channel-interleaved image. channels is 1 (gray) or 3 (RGB).
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c = 1, T fill = T{}) : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int w, int h, int c = 0) { return data[(static_cast<std::size_t>(h) * width + w) * channels + c]; }
  const T& at(int w, int h, int c = 0) const {
    return data[(static_cast<std::size_t>(h) * width + w) * channels + c];
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  bool operator==(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels && data == o.data;
  }
};

using ImageU8 = Image<std::uint8_t>;
using ImageF = Image<double>;

// Rec.601 luma. RGB collapses to a single gray channel; gray passes through.
inline ImageF luma(const ImageU8& img) {
  ImageF out(img.width, img.height, 1);
  if (img.channels == 1) {
    for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i];
  } else if (img.channels == 3) {
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
      out.data[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
    }
  } else {
    throw std::domain_error("luma: unsupported channel count " + std::to_string(img.channels));
  }
  return out;
}

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

// Horizontal index with equirectangular wrap; vertical clamps to the border.
inline int wrap_w(int w, int width) {
  w %= width;
  return w < 0 ? w + width : w;
}
inline int clamp_h(int h, int height) { return std::clamp(h, 0, height - 1); }

}  // namespace firefly
