#pragma once

#include <array>
#include <string_view>

#include <Eigen/Core>

#include "slideq/image.hpp"

namespace slideq {

inline constexpr int kMetricCount = 7;

/// The seven design-cue scores, each in [0,1]. Higher means "more of the
/// property", not "better".
struct MetricVector {
  double whitespace = 0.0;
  double text_density = 0.0;
  double colorfulness = 0.0;
  double color_harmony = 0.0;
  double edge_density = 0.0;
  double brightness_contrast = 0.0;
  double layout_balance = 0.0;

  /// Canonical column order used by descriptors, CSV files and the model.
  static constexpr std::array<std::string_view, kMetricCount> names = {
      "whitespace",   "text_density",        "colorfulness",  "color_harmony",
      "edge_density", "brightness_contrast", "layout_balance"};

  Eigen::Matrix<double, kMetricCount, 1> as_vector() const {
    Eigen::Matrix<double, kMetricCount, 1> v;
    v << whitespace, text_density, colorfulness, color_harmony, edge_density,
        brightness_contrast, layout_balance;
    return v;
  }

  template <typename Derived>
  static MetricVector from_vector(const Eigen::MatrixBase<Derived>& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5), v(6)};
  }

  friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

// Constants shared by the metric implementations.
inline constexpr int kWhitespaceBins = 64;
inline constexpr double kWhitespaceTolerance = 0.08;
inline constexpr double kTextMinHeight = 0.005;  // fraction of image height
inline constexpr double kTextMaxHeight = 0.08;
inline constexpr double kTextMinAspect = 0.1;
inline constexpr double kTextMaxAspect = 15.0;
inline constexpr double kTextMinFill = 0.1;
inline constexpr double kTextMaxFill = 0.95;
inline constexpr double kColorfulnessScale = 150.0;
inline constexpr int kHueBins = 36;
inline constexpr double kChromaMinSaturation = 0.2;
inline constexpr double kChromaMinValue = 0.15;
inline constexpr double kCannySigma = 1.4;
inline constexpr double kCannyHighRatio = 0.2;
inline constexpr double kCannyLowRatio = 0.5;

/// Dominant luminance bin; ties resolve to the brighter bin.
struct Background {
  int bin = 0;
  double level = 0.0;  // bin centre
};

Background estimate_background(const GrayMap& luma);

/// True where |Y - background| <= tolerance.
Plane<bool> whitespace_mask(const GrayMap& luma);

double whitespace(const SlideImage& img);
double text_density(const SlideImage& img);
double colorfulness(const SlideImage& img);
double color_harmony(const SlideImage& img);
double edge_density(const SlideImage& img);
double brightness_contrast(const SlideImage& img);
double layout_balance(const SlideImage& img);

// Luminance-only metrics, for callers that already hold Y.
double whitespace(const GrayMap& luma);
double text_density(const GrayMap& luma);
double edge_density(const GrayMap& luma);
double brightness_contrast(const GrayMap& luma);
double layout_balance(const GrayMap& luma);

/// Canny edge map on a luminance plane (5x5 Gaussian, Sobel, NMS, hysteresis).
Plane<bool> canny_edges(const GrayMap& luma);

/// Otsu threshold over a 256-bin histogram of values in [0,1]. Returns the
/// highest bin index assigned to the lower class, or -1 if the histogram has
/// fewer than two occupied bins.
int otsu_threshold_bin(const GrayMap& values);

/// Resizes to the metric raster once, then runs all seven metrics on it.
MetricVector compute_metrics(const SlideImage& img);

}  // namespace slideq
