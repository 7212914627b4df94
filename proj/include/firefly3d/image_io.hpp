#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "firefly3d/errors.hpp"
#include "firefly3d/image.hpp"

namespace firefly {

// ---------------------------------------------------------------------------
// PNG (via libpng): 8-bit gray or RGB. Reads expand palette/16-bit/alpha
// inputs down to 8-bit gray or RGB.
// ---------------------------------------------------------------------------

inline ImageU8 read_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw DataError("cannot open PNG: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    std::fclose(fp);
    throw DataError("libpng init failed for " + path);
  }
  ImageU8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("corrupt PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = static_cast<int>(png_get_channels(png, info));
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("unsupported PNG channel count in " + path);
  }
  img = ImageU8(w, h, ch);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = img.data.data() + static_cast<std::size_t>(y) * w * ch;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

inline void write_png(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3) throw DataError("write_png: channels must be 1 or 3");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("cannot write PNG: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw DataError("libpng init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("PNG write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// ---------------------------------------------------------------------------
// PGM (P5) / PPM (P6), binary, maxval 255
// ---------------------------------------------------------------------------

namespace detail {
inline int pnm_token(std::istream& in, const std::string& path) {
  // skips whitespace and '#' comments
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
    } else if (!std::isspace(c)) {
      in.unget();
      break;
    }
  }
  int v;
  if (!(in >> v)) throw DataError("malformed PNM header: " + path);
  return v;
}
}  // namespace detail

inline ImageU8 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw DataError("not a binary PGM/PPM: " + path);
  const int ch = (m1 == '6') ? 3 : 1;
  const int w = detail::pnm_token(in, path);
  const int h = detail::pnm_token(in, path);
  const int maxval = detail::pnm_token(in, path);
  if (w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PNM header in " + path);
  in.get();  // single whitespace before raster
  ImageU8 img(w, h, ch);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw DataError("truncated PNM raster: " + path);
  return img;
}

inline void write_pnm(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3) throw DataError("write_pnm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!out) throw DataError("short write: " + path);
}

inline ImageU8 read_image(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  return read_pnm(path);
}

inline void write_image(const std::string& path, const ImageU8& img) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png" || ext == ".PNG") return write_png(path, img);
  return write_pnm(path, img);
}

// ---------------------------------------------------------------------------
// Frame sources: an ordered sequence of frames plus the recording rate.
// ---------------------------------------------------------------------------

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t count() const = 0;
  virtual ImageU8 frame(std::size_t k) const = 0;
  virtual double fps() const = 0;
};

// Directory of numbered PNG/PGM/PPM files; lexicographic order == frame order.
class ImageDirSource final : public FrameSource {
 public:
  ImageDirSource(const std::string& dir, double fps) : fps_(fps) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("frame directory not found: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const auto ext = e.path().extension().string();
      if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".PNG") paths_.push_back(e.path().string());
    }
    std::sort(paths_.begin(), paths_.end());
    if (paths_.empty()) throw DataError("no frames (.png/.pgm/.ppm) in " + dir);
  }

  std::size_t count() const override { return paths_.size(); }
  ImageU8 frame(std::size_t k) const override {
    if (k >= paths_.size()) throw DataError("frame " + std::to_string(k) + " out of range (have " +
                                            std::to_string(paths_.size()) + ")");
    return read_image(paths_[k]);
  }
  double fps() const override { return fps_; }
  const std::vector<std::string>& paths() const { return paths_; }

 private:
  std::vector<std::string> paths_;
  double fps_;
};

// Raw planar 8-bit stream `<name>.raw` with a JSON sidecar `<name>.json`
// holding {"width":..,"height":..,"channels":..,"fps":..}. Planar layout:
// per frame, each channel's full W*H plane in sequence.
class RawStreamSource final : public FrameSource {
 public:
  RawStreamSource(const std::string& raw_path, int width, int height, int channels, double fps)
      : path_(raw_path), width_(width), height_(height), channels_(channels), fps_(fps) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
      throw DataError("raw stream header invalid: " + raw_path);
    const auto bytes = std::filesystem::file_size(raw_path);
    frame_bytes_ = static_cast<std::size_t>(width) * height * channels;
    if (bytes % frame_bytes_ != 0) throw DataError("raw stream size is not a whole number of frames: " + raw_path);
    count_ = bytes / frame_bytes_;
  }

  std::size_t count() const override { return count_; }
  double fps() const override { return fps_; }

  ImageU8 frame(std::size_t k) const override {
    if (k >= count_) throw DataError("frame " + std::to_string(k) + " out of range (have " +
                                     std::to_string(count_) + ")");
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw DataError("cannot open raw stream: " + path_);
    in.seekg(static_cast<std::streamoff>(k * frame_bytes_));
    std::vector<std::uint8_t> planar(frame_bytes_);
    in.read(reinterpret_cast<char*>(planar.data()), static_cast<std::streamsize>(frame_bytes_));
    if (in.gcount() != static_cast<std::streamsize>(frame_bytes_))
      throw DataError("truncated raw stream: " + path_);
    ImageU8 img(width_, height_, channels_);
    const std::size_t plane = static_cast<std::size_t>(width_) * height_;
    for (int c = 0; c < channels_; ++c)
      for (std::size_t i = 0; i < plane; ++i) img.data[i * channels_ + c] = planar[c * plane + i];
    return img;
  }

 private:
  std::string path_;
  int width_, height_, channels_;
  double fps_;
  std::size_t frame_bytes_ = 0;
  std::size_t count_ = 0;
};

}  // namespace firefly
