#include "synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>

#include <unistd.h>

namespace fs = std::filesystem;

namespace slideq::synth {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Rgb from_hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

}  // namespace

void draw_text_line(SlideImage& img, int x, int y, int glyphs, int glyph_h, Rgb ink) {
  const int glyph_w = std::max(3, glyph_h * 5 / 8);
  for (int g = 0; g < glyphs; ++g) {
    const int gx = x + g * (glyph_w + 2) + (g / 5) * 4;  // word gap every five glyphs
    if (gx + glyph_w >= img.width()) break;
    img.fill_rect(gx, y, gx + glyph_w, y + 1, ink);
    img.fill_rect(gx, y + glyph_h - 1, gx + glyph_w, y + glyph_h, ink);
    img.fill_rect(gx, y, gx + 1, y + glyph_h, ink);
    img.fill_rect(gx + glyph_w - 1, y, gx + glyph_w, y + glyph_h, ink);
  }
}

SlideImage tidy_slide(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  const double bg_level = uniform(rng, 0.93, 1.0);
  SlideImage img(kSlideWidth, kSlideHeight, {bg_level, bg_level, bg_level * uniform(rng, 0.97, 1.0)});
  const double hue = uniform(rng, 190.0, 230.0);
  const Rgb accent = from_hsv(hue, uniform(rng, 0.35, 0.55), uniform(rng, 0.45, 0.6));
  const double ink_level = uniform(rng, 0.05, 0.2);
  const Rgb ink{ink_level, ink_level, ink_level};

  const int margin = uniform_int(rng, 18, 30);
  draw_text_line(img, margin, uniform_int(rng, 16, 24), uniform_int(rng, 10, 18), 14, accent);

  const int bullets = uniform_int(rng, 2, 5);
  const bool figure = uniform(rng, 0.0, 1.0) < 0.5;
  const int text_right = figure ? kSlideWidth / 2 : kSlideWidth - margin;
  int y = 60;
  for (int b = 0; b < bullets && y < kSlideHeight - 30; ++b) {
    img.fill_rect(margin, y + 3, margin + 4, y + 7, accent);
    const int room = (text_right - margin - 12) / 7;
    draw_text_line(img, margin + 12, y, uniform_int(rng, std::max(3, room / 2), std::max(4, room)), 9,
                   ink);
    y += uniform_int(rng, 24, 32);
  }
  if (figure) {
    const int x0 = kSlideWidth / 2 + uniform_int(rng, 10, 20);
    const int y0 = uniform_int(rng, 60, 80);
    const Rgb fill = from_hsv(hue, uniform(rng, 0.15, 0.3), uniform(rng, 0.8, 0.9));
    img.fill_rect(x0, y0, kSlideWidth - margin, y0 + uniform_int(rng, 80, 120), fill);
  }
  return img;
}

SlideImage clutter(const SlideImage& base, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0xbf58476d1ce4e5b9ULL + 3);
  SlideImage img = base;
  const int blocks = uniform_int(rng, 8, 14);
  for (int i = 0; i < blocks; ++i) {
    const int x0 = uniform_int(rng, 0, kSlideWidth - 20);
    const int y0 = uniform_int(rng, 0, kSlideHeight - 20);
    const Rgb c = from_hsv(uniform(rng, 0.0, 360.0), uniform(rng, 0.7, 1.0), uniform(rng, 0.6, 1.0));
    img.fill_rect(x0, y0, x0 + uniform_int(rng, 15, 80), y0 + uniform_int(rng, 15, 60), c);
  }
  std::bernoulli_distribution salt(0.05);
  std::bernoulli_distribution white(0.5);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (salt(rng)) {
        const double v = white(rng) ? 1.0 : 0.0;
        img.set(x, y, {v, v, v});
      }
    }
  }
  return img;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("slideq_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<fs::path> write_tidy_deck(const fs::path& dir, const std::string& deck, int n,
                                      std::uint64_t first_seed) {
  fs::create_directories(dir / deck);
  std::vector<fs::path> out;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "slide_%04d.png", i);
    const fs::path p = dir / deck / name;
    write_png_file(tidy_slide(first_seed + static_cast<std::uint64_t>(i)), p);
    out.push_back(p);
  }
  return out;
}

}  // namespace slideq::synth
