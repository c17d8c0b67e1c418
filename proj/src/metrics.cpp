#include "slideq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace slideq {
namespace {

// Row sums accumulated over mirrored pairs (x, W-1-x). Floating-point addition
// is commutative, so the result is bit-identical for a horizontally flipped
// plane.
template <typename Derived>
double mirror_sum(const Eigen::ArrayBase<Derived>& p) {
  const Eigen::Index w = p.cols();
  double total = 0.0;
  for (Eigen::Index y = 0; y < p.rows(); ++y) {
    double row = 0.0;
    for (Eigen::Index x = 0; x < w / 2; ++x) row += p(y, x) + p(y, w - 1 - x);
    if (w % 2 == 1) row += p(y, w / 2);
    total += row;
  }
  return total;
}

// Population mean and standard deviation, flip-stable.
template <typename Derived>
std::pair<double, double> moments(const Eigen::ArrayBase<Derived>& p) {
  const double n = static_cast<double>(p.size());
  const double mean = mirror_sum(p) / n;
  const double var = mirror_sum((p - mean).square()) / n;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

int luma_bin(double y, int bins) {
  return std::min(bins - 1, static_cast<int>(std::floor(y * bins)));
}

struct Hsv {
  double h = 0.0;  // degrees in [0,360)
  double s = 0.0;
  double v = 0.0;
};

Hsv to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out{0.0, mx > 0.0 ? delta / mx : 0.0, mx};
  if (delta <= 0.0) return out;
  double h;
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / delta + 2.0);
  } else {
    h = 60.0 * ((r - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

struct Arc {
  double offset;  // degrees from the template rotation
  double width;   // degrees
};

struct HueTemplate {
  std::vector<Arc> arcs;
};

const std::vector<HueTemplate>& harmonic_templates() {
  static const std::vector<HueTemplate> kTemplates = {
      {{{0.0, 18.0}}},                   // i
      {{{0.0, 93.6}}},                   // V
      {{{0.0, 18.0}, {180.0, 18.0}}},    // I
      {{{0.0, 180.0}}},                  // T
      {{{0.0, 93.6}, {180.0, 18.0}}},    // Y
      {{{0.0, 93.6}, {180.0, 93.6}}},    // X
  };
  return kTemplates;
}

double circular_distance(double a, double b) {
  const double d = std::fabs(std::fmod(a - b, 360.0));
  return std::min(d, 360.0 - d);
}

// Edge-replicating accessor.
double clamped(const GrayMap& p, Eigen::Index y, Eigen::Index x) {
  y = std::clamp<Eigen::Index>(y, 0, p.rows() - 1);
  x = std::clamp<Eigen::Index>(x, 0, p.cols() - 1);
  return p(y, x);
}

GrayMap gaussian_blur5(const GrayMap& src, double sigma) {
  double k[3];
  for (int i = 0; i < 3; ++i) k[i] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  const double norm = k[0] + 2.0 * (k[1] + k[2]);
  for (double& v : k) v /= norm;

  GrayMap tmp(src.rows(), src.cols());
  for (Eigen::Index y = 0; y < src.rows(); ++y) {
    for (Eigen::Index x = 0; x < src.cols(); ++x) {
      tmp(y, x) = k[0] * src(y, x) +
                  k[1] * (clamped(src, y, x - 1) + clamped(src, y, x + 1)) +
                  k[2] * (clamped(src, y, x - 2) + clamped(src, y, x + 2));
    }
  }
  GrayMap out(src.rows(), src.cols());
  for (Eigen::Index y = 0; y < src.rows(); ++y) {
    for (Eigen::Index x = 0; x < src.cols(); ++x) {
      out(y, x) = k[0] * tmp(y, x) +
                  k[1] * (clamped(tmp, y - 1, x) + clamped(tmp, y + 1, x)) +
                  k[2] * (clamped(tmp, y - 2, x) + clamped(tmp, y + 2, x));
    }
  }
  return out;
}

struct Component {
  Eigen::Index x0, y0, x1, y1;  // inclusive bbox
  Eigen::Index area;
};

std::vector<Component> connected_components(const Plane<bool>& fg) {
  const Eigen::Index h = fg.rows();
  const Eigen::Index w = fg.cols();
  Plane<bool> seen = Plane<bool>::Constant(h, w, false);
  std::vector<Component> out;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!fg(y, x) || seen(y, x)) continue;
      Component c{x, y, x, y, 0};
      seen(y, x) = true;
      stack.emplace_back(y, x);
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        ++c.area;
        c.x0 = std::min(c.x0, cx);
        c.x1 = std::max(c.x1, cx);
        c.y0 = std::min(c.y0, cy);
        c.y1 = std::max(c.y1, cy);
        for (Eigen::Index dy = -1; dy <= 1; ++dy) {
          for (Eigen::Index dx = -1; dx <= 1; ++dx) {
            const Eigen::Index ny = cy + dy;
            const Eigen::Index nx = cx + dx;
            if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
            if (fg(ny, nx) && !seen(ny, nx)) {
              seen(ny, nx) = true;
              stack.emplace_back(ny, nx);
            }
          }
        }
      }
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

Background estimate_background(const GrayMap& luma) {
  std::array<Eigen::Index, kWhitespaceBins> hist{};
  for (Eigen::Index i = 0; i < luma.size(); ++i) {
    ++hist[static_cast<std::size_t>(luma_bin(luma(i), kWhitespaceBins))];
  }
  int mode = kWhitespaceBins - 1;
  for (int b = kWhitespaceBins - 1; b >= 0; --b) {
    if (hist[static_cast<std::size_t>(b)] > hist[static_cast<std::size_t>(mode)]) mode = b;
  }
  return {mode, (mode + 0.5) / kWhitespaceBins};
}

Plane<bool> whitespace_mask(const GrayMap& luma) {
  const double level = estimate_background(luma).level;
  return (luma - level).abs() <= kWhitespaceTolerance;
}

double whitespace(const GrayMap& luma) {
  const auto mask = whitespace_mask(luma);
  return static_cast<double>(mask.count()) / static_cast<double>(luma.size());
}

int otsu_threshold_bin(const GrayMap& values) {
  constexpr int kBins = 256;
  std::array<double, kBins> hist{};
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    hist[static_cast<std::size_t>(luma_bin(std::clamp(values(i), 0.0, 1.0), kBins))] += 1.0;
  }
  if (std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0.0; }) < 2) {
    return -1;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];

  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  int best_bin = -1;
  for (int t = 0; t < kBins - 1; ++t) {
    w0 += hist[static_cast<std::size_t>(t)];
    sum0 += t * hist[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  return best_bin;
}

double text_density(const GrayMap& luma) {
  const Eigen::Index h = luma.rows();
  const Eigen::Index w = luma.cols();
  const GrayMap diff = (luma - estimate_background(luma).level).abs();
  const int t = otsu_threshold_bin(diff);
  if (t < 0) return 0.0;
  Plane<bool> fg(h, w);
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    fg(i) = luma_bin(std::clamp(diff(i), 0.0, 1.0), 256) > t;
  }

  const double min_h = kTextMinHeight * static_cast<double>(h);
  const double max_h = kTextMaxHeight * static_cast<double>(h);
  Plane<bool> covered = Plane<bool>::Constant(h, w, false);
  for (const Component& c : connected_components(fg)) {
    const double bw = static_cast<double>(c.x1 - c.x0 + 1);
    const double bh = static_cast<double>(c.y1 - c.y0 + 1);
    const double aspect = bw / bh;
    const double fill = static_cast<double>(c.area) / (bw * bh);
    if (bh < min_h || bh > max_h) continue;
    if (aspect < kTextMinAspect || aspect > kTextMaxAspect) continue;
    if (fill < kTextMinFill || fill > kTextMaxFill) continue;
    covered.block(c.y0, c.x0, c.y1 - c.y0 + 1, c.x1 - c.x0 + 1).setConstant(true);
  }
  return static_cast<double>(covered.count()) / static_cast<double>(luma.size());
}

double colorfulness(const SlideImage& img) {
  const Plane<double> r = 255.0 * img.red();
  const Plane<double> g = 255.0 * img.green();
  const Plane<double> b = 255.0 * img.blue();
  const Plane<double> rg = r - g;
  const Plane<double> yb = 0.5 * (r + g) - b;
  const auto [mu_rg, sd_rg] = moments(rg);
  const auto [mu_yb, sd_yb] = moments(yb);
  const double m = std::sqrt(sd_rg * sd_rg + sd_yb * sd_yb) +
                   0.3 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb);
  return std::clamp(m / kColorfulnessScale, 0.0, 1.0);
}

double color_harmony(const SlideImage& img) {
  // Weights are accumulated in fixed point so the histogram does not depend
  // on pixel visiting order.
  constexpr double kFixed = 1 << 20;
  std::array<std::uint64_t, kHueBins> mass{};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb c = img.at(x, y);
      const Hsv hsv = to_hsv(c.r, c.g, c.b);
      if (hsv.s < kChromaMinSaturation || hsv.v < kChromaMinValue) continue;
      const int bin = std::min(kHueBins - 1, static_cast<int>(hsv.h / (360.0 / kHueBins)));
      mass[static_cast<std::size_t>(bin)] +=
          static_cast<std::uint64_t>(std::llround(hsv.s * hsv.v * kFixed));
    }
  }
  std::uint64_t total = 0;
  for (auto m : mass) total += m;
  if (total == 0) return 1.0;

  constexpr double kBinWidth = 360.0 / kHueBins;
  std::uint64_t best = 0;
  for (const HueTemplate& tpl : harmonic_templates()) {
    for (int rot = 0; rot < kHueBins; ++rot) {
      const double alpha = (rot + 0.5) * kBinWidth;
      std::uint64_t inside = 0;
      for (int bin = 0; bin < kHueBins; ++bin) {
        const double centre = (bin + 0.5) * kBinWidth;
        const bool hit = std::any_of(tpl.arcs.begin(), tpl.arcs.end(), [&](const Arc& a) {
          return circular_distance(centre, alpha + a.offset) <= a.width / 2.0 + 1e-9;
        });
        if (hit) inside += mass[static_cast<std::size_t>(bin)];
      }
      best = std::max(best, inside);
    }
  }
  return static_cast<double>(best) / static_cast<double>(total);
}

Plane<bool> canny_edges(const GrayMap& luma) {
  const Eigen::Index h = luma.rows();
  const Eigen::Index w = luma.cols();
  const GrayMap blurred = gaussian_blur5(luma, kCannySigma);

  // Sobel, written as separable smoothing + central difference so that each
  // symmetric pair is added before weighting.
  GrayMap smooth_v(h, w), smooth_h(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      smooth_v(y, x) = (clamped(blurred, y - 1, x) + clamped(blurred, y + 1, x)) +
                       2.0 * blurred(y, x);
      smooth_h(y, x) = (clamped(blurred, y, x - 1) + clamped(blurred, y, x + 1)) +
                       2.0 * blurred(y, x);
    }
  }
  GrayMap gx(h, w), gy(h, w), mag(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      gx(y, x) = clamped(smooth_v, y, x + 1) - clamped(smooth_v, y, x - 1);
      gy(y, x) = clamped(smooth_h, y + 1, x) - clamped(smooth_h, y - 1, x);
      mag(y, x) = std::hypot(gx(y, x), gy(y, x));
    }
  }
  const double max_mag = mag.maxCoeff();
  Plane<bool> edges = Plane<bool>::Constant(h, w, false);
  if (!(max_mag > 0.0)) return edges;

  const double tan22 = std::tan(M_PI / 8.0);
  const double tan67 = std::tan(3.0 * M_PI / 8.0);
  auto mag_at = [&](Eigen::Index y, Eigen::Index x) {
    if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
    return mag(y, x);
  };

  // Non-maximum suppression along the quantized gradient direction. The
  // neighbour against the gradient must be strictly lower and the one along
  // it may tie, so a two-pixel plateau keeps one pixel. Stepping by the
  // gradient's sign keeps the rule mirror-symmetric.
  auto sign = [](double v) -> Eigen::Index { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
  GrayMap thin = GrayMap::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const double m = mag(y, x);
      if (m <= 0.0) continue;
      const double ax = std::fabs(gx(y, x));
      const double ay = std::fabs(gy(y, x));
      Eigen::Index sx = sign(gx(y, x));
      Eigen::Index sy = sign(gy(y, x));
      if (ay <= tan22 * ax) {
        sy = 0;
      } else if (ay >= tan67 * ax) {
        sx = 0;
      }
      const double ahead = mag_at(y + sy, x + sx);
      const double behind = mag_at(y - sy, x - sx);
      if (m > behind && m >= ahead) thin(y, x) = m;
    }
  }

  const double high = kCannyHighRatio * max_mag;
  const double low = kCannyLowRatio * high;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (thin(y, x) >= high && !edges(y, x)) {
        edges(y, x) = true;
        stack.emplace_back(y, x);
      }
    }
  }
  while (!stack.empty()) {
    const auto [cy, cx] = stack.back();
    stack.pop_back();
    for (Eigen::Index dy = -1; dy <= 1; ++dy) {
      for (Eigen::Index dx = -1; dx <= 1; ++dx) {
        const Eigen::Index ny = cy + dy;
        const Eigen::Index nx = cx + dx;
        if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
        if (!edges(ny, nx) && thin(ny, nx) >= low) {
          edges(ny, nx) = true;
          stack.emplace_back(ny, nx);
        }
      }
    }
  }
  return edges;
}

double edge_density(const GrayMap& luma) {
  return static_cast<double>(canny_edges(luma).count()) / static_cast<double>(luma.size());
}

double brightness_contrast(const GrayMap& luma) {
  return std::clamp(2.0 * moments(luma).second, 0.0, 1.0);
}

double layout_balance(const GrayMap& luma) {
  const Plane<bool> ink = !whitespace_mask(luma);
  const Eigen::Index h = luma.rows();
  const Eigen::Index w = luma.cols();
  // Doubled pixel-centre coordinates (2x+1) keep every sum an exact integer.
  std::int64_t n = 0, sx = 0, sy = 0;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!ink(y, x)) continue;
      ++n;
      sx += 2 * x + 1;
      sy += 2 * y + 1;
    }
  }
  if (n == 0) return 1.0;
  const double dx = static_cast<double>(sx - w * n) / static_cast<double>(2 * n);
  const double dy = static_cast<double>(sy - h * n) / static_cast<double>(2 * n);
  const double corner = std::hypot(w / 2.0, h / 2.0);
  return std::clamp(1.0 - std::hypot(dx, dy) / corner, 0.0, 1.0);
}

double whitespace(const SlideImage& img) { return whitespace(luminance_map(img)); }
double text_density(const SlideImage& img) { return text_density(luminance_map(img)); }
double edge_density(const SlideImage& img) { return edge_density(luminance_map(img)); }
double brightness_contrast(const SlideImage& img) {
  return brightness_contrast(luminance_map(img));
}
double layout_balance(const SlideImage& img) { return layout_balance(luminance_map(img)); }

MetricVector compute_metrics(const SlideImage& img) {
  const SlideImage norm = normalize_size(img);
  const GrayMap luma = luminance_map(norm);
  MetricVector m;
  m.whitespace = whitespace(luma);
  m.text_density = text_density(luma);
  m.colorfulness = colorfulness(norm);
  m.color_harmony = color_harmony(norm);
  m.edge_density = edge_density(luma);
  m.brightness_contrast = brightness_contrast(luma);
  m.layout_balance = layout_balance(luma);
  return m;
}

}  // namespace slideq
