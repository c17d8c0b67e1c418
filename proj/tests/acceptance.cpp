// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "slideq/error.hpp"
#include "slideq/isolation_forest.hpp"
#include "slideq/latent.hpp"
#include "slideq/metrics.hpp"
#include "slideq/model_io.hpp"
#include "slideq/pipeline.hpp"
#include "slideq/stats.hpp"
#include "synthetic.hpp"

using namespace slideq;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome fisher_interval() {
  const auto [lo, hi] = stats::fisher_ci(-0.83, 6);
  const double lo2 = std::trunc(lo * 100.0) / 100.0;
  const double hi2 = std::trunc(hi * 100.0) / 100.0;
  const bool ok = lo2 == -0.98 && hi2 == -0.05;
  return {ok, fmt("ci=(%.6f, %.6f)", lo, hi)};
}

Outcome spearman_closed_form() {
  const std::vector<int> xr{1, 2, 3, 4, 5, 6};
  const std::vector<int> yr{6, 5, 4, 1, 3, 2};
  Eigen::VectorXd x(6), y(6);
  long long d2 = 0;
  for (int i = 0; i < 6; ++i) {
    x(i) = xr[static_cast<std::size_t>(i)];
    y(i) = yr[static_cast<std::size_t>(i)];
    d2 += (xr[static_cast<std::size_t>(i)] - yr[static_cast<std::size_t>(i)]) *
          (xr[static_cast<std::size_t>(i)] - yr[static_cast<std::size_t>(i)]);
  }
  const stats::CorrelationResult r = stats::spearman(x, y);
  const double oracle_p = oracle::spearman_bruteforce_p(xr, yr);
  const bool ok = d2 == 64 && std::abs(r.coefficient - (-0.8286)) <= 1e-4 &&
                  std::round(r.coefficient * 100.0) / 100.0 == -0.83 && r.exact_p &&
                  r.p_value == oracle_p;
  return {ok, fmt("rho=%.10f p=%.17g oracle=%.17g", r.coefficient, r.p_value, oracle_p)};
}

Outcome c_factor_values() {
  const double c2 = c_factor(2);
  const double c256 = c_factor(256);
  const auto exact = static_cast<double>(oracle::c_of(256));
  const bool ok = c2 == 1.0 && std::abs(c256 - exact) <= 1e-12;
  return {ok, fmt("c(2)=%.17g c(256)=%.10f oracle=%.10f", c2, c256, exact)};
}

Outcome score_identity() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> path(0.0, 40.0), cpsi(0.5, 20.0);
  double worst = 0.0;
  bool bounded = true;
  for (int i = 0; i < 1000; ++i) {
    const double l = path(rng), c = cpsi(rng);
    const double a = anomaly_from_path(l, c);
    worst = std::max(worst, std::abs(a - std::exp2(-l / c)));
    bounded = bounded && a > 0.0 && a <= 1.0;
  }
  return {worst <= 1e-12 && bounded, fmt("max_delta=%.3g", worst)};
}

Outcome forest_oracle() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trees = 1; trees <= 3; ++trees) {
    for (int psi : {2, 5, 8}) {
      Eigen::MatrixXd X(40, 3);
      for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
      ForestParams p;
      p.trees = trees;
      p.subsample = psi;
      p.seed = 100 + static_cast<std::uint64_t>(trees * 10 + psi);
      const IsolationForest f = IsolationForest::fit(X, p);
      const oracle::NaiveForest naive(X, trees, psi, p.seed, p.resolved_height_limit());
      for (int probe = 0; probe < 50; ++probe) {
        Eigen::VectorXd x(3);
        for (int j = 0; j < 3; ++j) x(j) = 1.5 * g(rng);
        worst = std::max(worst, std::abs(f.score(x).anomaly - naive.score(x)));
      }
    }
  }
  return {worst <= 1e-12, fmt("max_delta=%.3g", worst)};
}

Outcome outlier_separation() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(500, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  const ForestParams p;  // 200 trees, psi 256, seed 42
  const IsolationForest a = IsolationForest::fit(X, p);
  const IsolationForest b = IsolationForest::fit(X, p);
  std::vector<double> train;
  bool same = true;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double s = a.score(X.row(i).transpose()).anomaly;
    same = same && s == b.score(X.row(i).transpose()).anomaly;
    train.push_back(s);
  }
  const Eigen::Vector2d probe(10.0, 10.0);
  const double s = a.score(probe).anomaly;
  same = same && s == b.score(probe).anomaly;
  const double p95 = quantile_linear(train, 0.95);
  return {s > p95 && same && p.seed == 42, fmt("probe=%.6f p95=%.6f", s, p95)};
}

Outcome metric_suite() {
  const MetricVector white = compute_metrics(SlideImage(200, 150));
  const bool white_ok = white == MetricVector{1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0};

  SlideImage half(200, 150);
  for (int y = 0; y < 150; ++y) {
    for (int x = 0; x < 100; ++x) half.set(x, y, {0.0, 0.0, 0.0});
  }
  const MetricVector h = compute_metrics(half);
  const bool half_ok = h.whitespace == 0.5 && h.brightness_contrast == 1.0 && h.colorfulness == 0.0;

  SlideImage noise(200, 150);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  for (int y = 0; y < 150; ++y) {
    for (int x = 0; x < 200; ++x) {
      const double v = u(rng);
      noise.set(x, y, {v, v, v});
    }
  }
  const double c = compute_metrics(noise).colorfulness;
  return {white_ok && half_ok && c == 0.0,
          fmt("half.whitespace=%.17g half.contrast=%.17g noise.colorfulness=%.17g", h.whitespace,
              h.brightness_contrast, c)};
}

Outcome pca_numerics() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(100, 10);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  const PcaModelD m = pca_fit(X, 10);
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  const double ortho = (gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff();
  bool monotone = true;
  for (Eigen::Index i = 1; i < m.explained_variance.size(); ++i) {
    monotone = monotone && m.explained_variance(i) <= m.explained_variance(i - 1);
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd row = X.row(i).transpose();
    const Eigen::VectorXd back = m.reconstruct(m.project(row));
    worst = std::max(worst, (back - row).norm() / row.norm());
  }
  return {ortho <= 1e-8 && monotone && worst <= 1e-6,
          fmt("ortho=%.3g recon=%.3g", ortho, worst)};
}

Outcome reliability_oracle() {
  const stats::RatingsMatrix R = read_ratings(SLIDEQ_TEST_DATA "/ratings_visuals.csv");
  const stats::Reliability r = stats::reliability(R);
  const double da = std::abs(r.cronbach_alpha - oracle::cronbach_alpha(R.values));
  const double di = std::abs(r.icc_2k - oracle::icc_2k(R.values));
  const double dw = std::abs(r.kendall_w - oracle::kendall_w(R.values));
  const stats::Reliability id =
      stats::reliability(read_ratings(SLIDEQ_TEST_DATA "/ratings_identical.csv"));
  const bool ok = da <= 1e-9 && di <= 1e-9 && dw <= 1e-9 && id.cronbach_alpha == 1.0 &&
                  id.icc_2k == 1.0 && id.kendall_w == 1.0;
  return {ok, fmt("alpha=%.6f icc=%.6f w=%.6f", r.cronbach_alpha, r.icc_2k, r.kendall_w)};
}

FeatureTable synthetic_features(int n, std::uint64_t seed0, bool cluttered,
                                const EmbeddingProvider* provider) {
  std::vector<SlideImage> images;
  std::vector<std::string> keys;
  for (int i = 0; i < n; ++i) {
    const auto seed = seed0 + static_cast<std::uint64_t>(i);
    SlideImage img = synth::tidy_slide(seed);
    if (cluttered) img = synth::clutter(img, seed);
    images.push_back(std::move(img));
    keys.push_back(std::to_string(seed) + ".png");
  }
  return extract_features(images, keys, provider);
}

Outcome end_to_end() {
  const auto provider = make_provider(ProviderConfig{});
  const FeatureTable train = synthetic_features(300, 0, false, provider.get());
  const QualityModel model = fit_quality_model(train, provider->fingerprint(), ForestParams{});
  const AnomalyReport clean =
      score_features(model, synthetic_features(20, 100'000, false, provider.get()), Scorer::Forest);
  const AnomalyReport dirty =
      score_features(model, synthetic_features(20, 200'000, true, provider.get()), Scorer::Forest);
  double wins = 0.0;
  for (const auto& d : dirty.slides) {
    for (const auto& c : clean.slides) {
      wins += d.anomaly > c.anomaly ? 1.0 : (d.anomaly == c.anomaly ? 0.5 : 0.0);
    }
  }
  const double auc = wins / 400.0;
  return {dirty.deck_score > clean.deck_score && auc >= 0.8,
          fmt("clean_mean=%.6f clutter_mean=%.6f auc=%.4f", clean.deck_score, dirty.deck_score, auc)};
}

FeatureTable random_features(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  FeatureTable t;
  t.embeddings.resize(n, d);
  for (int i = 0; i < n; ++i) {
    t.keys.push_back("s" + std::to_string(i));
    for (int j = 0; j < d; ++j) t.embeddings(i, j) = g(rng);
    t.embeddings.row(i).normalize();
    t.metrics.push_back({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
  }
  return t;
}

Outcome persistence() {
  synth::TempDir dir("acceptance_model");
  ForestParams p;
  p.trees = 50;
  p.subsample = 64;
  const QualityModel m = fit_quality_model(random_features(150, 32, 1), {"stub", 32, "stub"}, p, 8);
  save_model(m, dir / "model.json");
  const QualityModel back = load_model(dir / "model.json");
  const FeatureTable probes = random_features(10, 32, 2);
  const AnomalyReport a = score_features(m, probes, Scorer::Forest);
  const AnomalyReport b = score_features(back, probes, Scorer::Forest);
  double worst = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    worst = std::max(worst, std::abs(a.slides[i].anomaly - b.slides[i].anomaly));
  }

  // Every corrupted variant must be rejected or decode to the same model.
  const std::string text = serialize_model(m);
  std::mt19937_64 rng(9);
  int accepted_changed = 0;
  std::vector<std::string> variants;
  for (int i = 0; i < 100; ++i) {
    std::string bad = text;
    const auto at = static_cast<std::size_t>(rng() % bad.size());
    bad[at] = static_cast<char>(bad[at] ^ (1 + rng() % 127));
    variants.push_back(bad);
  }
  for (std::size_t cut : {std::size_t{0}, std::size_t{1}, text.size() / 3, text.size() - 2}) {
    variants.push_back(text.substr(0, cut));
  }
  for (const auto& v : variants) {
    try {
      const QualityModel loaded = deserialize_model(v);
      const AnomalyReport r = score_features(loaded, probes, Scorer::Forest);
      for (std::size_t i = 0; i < 10; ++i) {
        if (r.slides[i].anomaly != a.slides[i].anomaly) {
          ++accepted_changed;
          break;
        }
      }
    } catch (const Error&) {
    }
  }
  return {worst <= 1e-12 && accepted_changed == 0,
          fmt("max_delta=%.3g corrupted_accepted=%.0f", worst, accepted_changed)};
}

Outcome contamination_rate() {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(400, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  const IsolationForest f = IsolationForest::fit(X, ForestParams{});
  int flagged = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    flagged += f.flagged(f.score(X.row(i).transpose()).anomaly) ? 1 : 0;
  }
  const double rate = flagged / 400.0;
  return {std::abs(rate - 0.10) <= 1.0 / 400.0 + 1e-12, fmt("rate=%.4f", rate)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"fisher confidence interval", fisher_interval},
      {"spearman closed form and exact p", spearman_closed_form},
      {"c(psi) normalizer", c_factor_values},
      {"path length to score identity", score_identity},
      {"forest matches naive oracle", forest_oracle},
      {"outlier separation and reproducibility", outlier_separation},
      {"metric analytic suite", metric_suite},
      {"pca numerics", pca_numerics},
      {"reliability oracle", reliability_oracle},
      {"end-to-end discrimination", end_to_end},
      {"model persistence", persistence},
      {"contamination flag rate", contamination_rate},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.ok ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
