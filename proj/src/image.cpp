#include "slideq/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slideq/error.hpp"

namespace slideq {
namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void check_color(Rgb c) {
  if (!in_unit(c.r) || !in_unit(c.g) || !in_unit(c.b)) {
    throw Error(ErrorCode::InvalidArgument, "channel value outside [0,1]");
  }
}

// Source coordinate and weights for one output sample along an axis.
struct Tap {
  Eigen::Index lo = 0;
  Eigen::Index hi = 0;
  double w = 0.0;  // weight of `hi`
};

std::vector<Tap> make_taps(Eigen::Index src, Eigen::Index dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (Eigen::Index i = 0; i < dst; ++i) {
    double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<Eigen::Index>(std::floor(s));
    const auto hi = std::min(lo + 1, src - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, s - static_cast<double>(lo)};
  }
  return taps;
}

Plane<double> resample(const Plane<double>& p, const std::vector<Tap>& xs,
                       const std::vector<Tap>& ys) {
  Plane<double> out(static_cast<Eigen::Index>(ys.size()),
                    static_cast<Eigen::Index>(xs.size()));
  for (Eigen::Index y = 0; y < out.rows(); ++y) {
    const Tap ty = ys[static_cast<std::size_t>(y)];
    for (Eigen::Index x = 0; x < out.cols(); ++x) {
      const Tap tx = xs[static_cast<std::size_t>(x)];
      const double top = p(ty.lo, tx.lo) + tx.w * (p(ty.lo, tx.hi) - p(ty.lo, tx.lo));
      const double bot = p(ty.hi, tx.lo) + tx.w * (p(ty.hi, tx.hi) - p(ty.hi, tx.lo));
      out(y, x) = std::clamp(top + ty.w * (bot - top), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

SlideImage::SlideImage(int width, int height, Rgb fill) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
  }
  check_color(fill);
  red_ = Plane<double>::Constant(height, width, fill.r);
  green_ = Plane<double>::Constant(height, width, fill.g);
  blue_ = Plane<double>::Constant(height, width, fill.b);
}

SlideImage::SlideImage(Plane<double> red, Plane<double> green, Plane<double> blue)
    : red_(std::move(red)), green_(std::move(green)), blue_(std::move(blue)) {
  if (red_.size() == 0 || red_.rows() != green_.rows() || red_.rows() != blue_.rows() ||
      red_.cols() != green_.cols() || red_.cols() != blue_.cols()) {
    throw Error(ErrorCode::InvalidArgument, "channel planes must be non-empty and equal-sized");
  }
  for (const auto* p : {&red_, &green_, &blue_}) {
    if (!((*p >= 0.0) && (*p <= 1.0)).all()) {
      throw Error(ErrorCode::InvalidArgument, "channel value outside [0,1]");
    }
  }
}

void SlideImage::set(int x, int y, Rgb c) {
  check_color(c);
  red_(y, x) = c.r;
  green_(y, x) = c.g;
  blue_(y, x) = c.b;
}

void SlideImage::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  check_color(c);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width());
  y1 = std::min(y1, height());
  if (x0 >= x1 || y0 >= y1) return;
  red_.block(y0, x0, y1 - y0, x1 - x0).setConstant(c.r);
  green_.block(y0, x0, y1 - y0, x1 - x0).setConstant(c.g);
  blue_.block(y0, x0, y1 - y0, x1 - x0).setConstant(c.b);
}

SlideImage resize_bilinear(const SlideImage& img, int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "target dimensions must be >= 1");
  }
  if (width == img.width() && height == img.height()) return img;
  const auto xs = make_taps(img.width(), width);
  const auto ys = make_taps(img.height(), height);
  return SlideImage(resample(img.red(), xs, ys), resample(img.green(), xs, ys),
                    resample(img.blue(), xs, ys));
}

SlideImage normalize_size(const SlideImage& img, int max_dim) {
  const int longest = std::max(img.width(), img.height());
  if (longest <= max_dim) return img;
  const double ratio = static_cast<double>(max_dim) / static_cast<double>(longest);
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * ratio)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * ratio)));
  return resize_bilinear(img, img.width() >= img.height() ? max_dim : w,
                          img.height() > img.width() ? max_dim : h);
}

GrayMap luminance_map(const SlideImage& img) {
  // Integer weights keep R=G=B inputs exact (white maps to exactly 1).
  GrayMap y = (299.0 * img.red() + 587.0 * img.green() + 114.0 * img.blue()) / 1000.0;
  return y.min(1.0).max(0.0);
}

SlideImage flip_horizontal(const SlideImage& img) {
  return SlideImage(img.red().rowwise().reverse(), img.green().rowwise().reverse(),
                    img.blue().rowwise().reverse());
}

}  // namespace slideq
