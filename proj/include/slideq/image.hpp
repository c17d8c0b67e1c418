#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace slideq {

/// Row-major single-channel plane, indexed (row, col) == (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GrayMap = Plane<double>;

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

/// Decoded RGB raster with channels in [0,1], stored as three planes.
class SlideImage {
 public:
  SlideImage() = default;
  SlideImage(int width, int height, Rgb fill = {1.0, 1.0, 1.0});
  SlideImage(Plane<double> red, Plane<double> green, Plane<double> blue);

  int width() const noexcept { return static_cast<int>(red_.cols()); }
  int height() const noexcept { return static_cast<int>(red_.rows()); }
  Eigen::Index pixel_count() const noexcept { return red_.size(); }

  Rgb at(int x, int y) const { return {red_(y, x), green_(y, x), blue_(y, x)}; }
  void set(int x, int y, Rgb c);
  /// Fills the half-open rectangle [x0,x1) × [y0,y1), clipped to the raster.
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);

  const Plane<double>& red() const noexcept { return red_; }
  const Plane<double>& green() const noexcept { return green_; }
  const Plane<double>& blue() const noexcept { return blue_; }

  friend bool operator==(const SlideImage& a, const SlideImage& b) {
    return a.red_.rows() == b.red_.rows() && a.red_.cols() == b.red_.cols() &&
           (a.red_ == b.red_).all() && (a.green_ == b.green_).all() &&
           (a.blue_ == b.blue_).all();
  }

 private:
  Plane<double> red_, green_, blue_;
};

/// Decodes a PNG or JPEG byte stream; 8-bit samples map to v/255.
SlideImage decode_image(std::span<const std::uint8_t> bytes);
SlideImage read_image_file(const std::filesystem::path& path);

/// Encodes as 8-bit RGB PNG (channels rounded to the nearest 1/255 step).
std::vector<std::uint8_t> encode_png(const SlideImage& img);
void write_png_file(const SlideImage& img, const std::filesystem::path& path);

inline constexpr int kMetricMaxDimension = 1024;

/// Bilinear resampling with half-pixel centres and clamped borders.
SlideImage resize_bilinear(const SlideImage& img, int width, int height);

/// Caps the longer side at `max_dim`, keeping aspect (rounded); no-op otherwise.
SlideImage normalize_size(const SlideImage& img, int max_dim = kMetricMaxDimension);

/// Rec.601 luma, Y = 0.299R + 0.587G + 0.114B.
GrayMap luminance_map(const SlideImage& img);

SlideImage flip_horizontal(const SlideImage& img);

}  // namespace slideq
