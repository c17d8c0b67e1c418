#include "slideq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "slideq/error.hpp"

namespace slideq::stats {
namespace {

void require_same_length(Eigen::Index a, Eigen::Index b) {
  if (a != b) {
    throw Error(ErrorCode::LengthMismatch,
                "vectors differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

// x0 + mean(x - x0): returns x0 exactly when all values are equal.
template <typename Derived>
double shifted_mean(const Eigen::MatrixBase<Derived>& x) {
  const double x0 = x(0);
  return x0 + (x.array() - x0).sum() / static_cast<double>(x.size());
}

// n * sum(y^2) - (sum y)^2 on y = x - x0; exact for small-integer ratings.
template <typename Derived>
double scaled_variance_numerator(const Eigen::MatrixBase<Derived>& x) {
  const Eigen::ArrayXd y = x.array() - x(0);
  const double n = static_cast<double>(y.size());
  const double s = y.sum();
  return n * y.square().sum() - s * s;
}

}  // namespace

RatingsMatrix::RatingsMatrix(Eigen::MatrixXd v, std::vector<std::string> subject_labels,
                             std::vector<std::string> rater_labels)
    : values(std::move(v)), subjects(std::move(subject_labels)), raters(std::move(rater_labels)) {
  if (values.rows() < 2 || values.cols() < 2) {
    throw Error(ErrorCode::InsufficientData, "ratings need at least 2 subjects and 2 raters");
  }
  if (!values.allFinite()) {
    throw Error(ErrorCode::ParseError, "ratings must be complete and finite");
  }
  auto fill = [](std::vector<std::string>& labels, Eigen::Index count, const char* what) {
    if (labels.empty()) {
      for (Eigen::Index i = 0; i < count; ++i) labels.push_back(std::to_string(i + 1));
    } else if (static_cast<Eigen::Index>(labels.size()) != count) {
      throw Error(ErrorCode::LengthMismatch, std::string(what) + " label count mismatch");
    }
  };
  fill(subjects, values.rows(), "subject");
  fill(raters, values.cols(), "rater");
}

std::string to_string(Method m) { return m == Method::Pearson ? "pearson" : "spearman"; }

Method parse_method(const std::string& text) {
  if (text == "pearson") return Method::Pearson;
  if (text == "spearman") return Method::Spearman;
  throw Error(ErrorCode::InvalidArgument, "unknown correlation method '" + text + "'");
}

Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b));
  });
  Eigen::VectorXd ranks(x.size());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x(static_cast<Eigen::Index>(order[j + 1])) ==
                            x(static_cast<Eigen::Index>(order[i]))) {
      ++j;
    }
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(static_cast<Eigen::Index>(order[k])) = mid;
    i = j + 1;
  }
  return ranks;
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y) {
  require_same_length(x.size(), y.size());
  if (x.size() < 2) throw Error(ErrorCode::TooFewPoints, "pearson needs n >= 2");
  const Eigen::ArrayXd dx = x.array() - x.mean();
  const Eigen::ArrayXd dy = y.array() - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ConstantInput, "constant input vector");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_t_pvalue(double r, int n) {
  if (n <= 2) return 1.0;
  if (std::fabs(r) >= 1.0) return 0.0;
  const double t = r * std::sqrt((n - 2) / (1.0 - r * r));
  const boost::math::students_t dist(n - 2);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
}

std::pair<double, double> fisher_ci(double r, int n, double level) {
  if (!(std::fabs(r) < 1.0)) throw Error(ErrorCode::DegenerateR, "fisher_ci needs |r| < 1");
  if (n < 4) throw Error(ErrorCode::TooFewPoints, "fisher_ci needs n >= 4");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must be in (0,1)");
  }
  const double z = std::atanh(r);
  const double crit = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  const double half = crit / std::sqrt(static_cast<double>(n - 3));
  return {std::tanh(z - half), std::tanh(z + half)};
}

namespace {

void attach_ci(CorrelationResult& res, double level) {
  if (res.n >= 4 && std::fabs(res.coefficient) < 1.0) {
    const auto [lo, hi] = fisher_ci(res.coefficient, res.n, level);
    res.ci_low = lo;
    res.ci_high = hi;
  }
}

}  // namespace

CorrelationResult pearson_test(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& y, double level) {
  CorrelationResult res;
  res.method = Method::Pearson;
  res.coefficient = pearson(x, y);
  res.n = static_cast<int>(x.size());
  res.p_value = correlation_t_pvalue(res.coefficient, res.n);
  attach_ci(res, level);
  return res;
}

double spearman_exact_pvalue(const Eigen::Ref<const Eigen::VectorXd>& x_ranks,
                             const Eigen::Ref<const Eigen::VectorXd>& y_ranks) {
  require_same_length(x_ranks.size(), y_ranks.size());
  const auto n = static_cast<std::size_t>(x_ranks.size());
  // Doubled, centred ranks are integers, so every cross-product sum below is
  // exact and ties in |rho| compare exactly.
  const double centre = static_cast<double>(n + 1);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = 2.0 * x_ranks(static_cast<Eigen::Index>(i)) - centre;
    b[i] = 2.0 * y_ranks(static_cast<Eigen::Index>(i)) - centre;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i) observed += a[i] * b[i];
  observed = std::fabs(observed);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[perm[i]];
    if (std::fabs(s) >= observed) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

CorrelationResult spearman(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y, double level) {
  require_same_length(x.size(), y.size());
  if (x.size() < 3) throw Error(ErrorCode::TooFewPoints, "spearman needs n >= 3");
  const Eigen::VectorXd rx = average_ranks(x);
  const Eigen::VectorXd ry = average_ranks(y);
  CorrelationResult res;
  res.method = Method::Spearman;
  res.coefficient = pearson(rx, ry);
  res.n = static_cast<int>(x.size());
  if (res.n <= kExactPermutationMaxN) {
    res.p_value = spearman_exact_pvalue(rx, ry);
    res.exact_p = true;
  } else {
    res.p_value = correlation_t_pvalue(res.coefficient, res.n);
  }
  attach_ci(res, level);
  return res;
}

double cronbach_alpha(const RatingsMatrix& R) {
  const auto m = static_cast<double>(R.n_raters());
  double item_sum = 0.0;
  for (Eigen::Index j = 0; j < R.n_raters(); ++j) {
    item_sum += scaled_variance_numerator(R.values.col(j));
  }
  // Shifting each column by its first entry leaves every variance unchanged.
  const Eigen::MatrixXd shifted = R.values.rowwise() - R.values.row(0);
  const double total = scaled_variance_numerator(shifted.rowwise().sum());
  if (total <= 0.0) throw Error(ErrorCode::ZeroTotalVariance, "total score variance is zero");
  // m/(m-1) * (1 - sum var_j / var_total), with the common 1/(n(n-1)) cancelled.
  return m * (total - item_sum) / ((m - 1.0) * total);
}

double icc_2k(const RatingsMatrix& R) {
  const Eigen::Index n = R.n_subjects();
  const Eigen::Index k = R.n_raters();
  Eigen::VectorXd row_mean(n), col_mean(k);
  for (Eigen::Index i = 0; i < n; ++i) row_mean(i) = shifted_mean(R.values.row(i));
  for (Eigen::Index j = 0; j < k; ++j) col_mean(j) = shifted_mean(R.values.col(j));
  const double grand = shifted_mean(col_mean);

  const double ss_rows = static_cast<double>(k) * (row_mean.array() - grand).square().sum();
  const double ss_cols = static_cast<double>(n) * (col_mean.array() - grand).square().sum();
  double ss_err = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double e = R.values(i, j) - row_mean(i) - col_mean(j) + grand;
      ss_err += e * e;
    }
  }
  const double ms_rows = ss_rows / static_cast<double>(n - 1);
  const double ms_cols = ss_cols / static_cast<double>(k - 1);
  const double ms_err = ss_err / static_cast<double>((n - 1) * (k - 1));
  const double denom = ms_rows + (ms_cols - ms_err) / static_cast<double>(n);
  if (denom == 0.0) throw Error(ErrorCode::DegenerateAnova, "ICC(2,k) denominator is zero");
  return (ms_rows - ms_err) / denom;
}

double kendall_w(const RatingsMatrix& R) {
  const Eigen::Index n = R.n_subjects();
  const Eigen::Index m = R.n_raters();
  Eigen::VectorXd rank_sums = Eigen::VectorXd::Zero(n);
  double tie_total = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd r = average_ranks(R.values.col(j));
    rank_sums += r;
    std::vector<double> sorted(r.data(), r.data() + r.size());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t a = 0; a < sorted.size();) {
      std::size_t b = a;
      while (b < sorted.size() && sorted[b] == sorted[a]) ++b;
      const auto t = static_cast<double>(b - a);
      tie_total += t * t * t - t;
      a = b;
    }
  }
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double mean_sum = md * (nd + 1.0) / 2.0;
  const double s = (rank_sums.array() - mean_sum).square().sum();
  const double denom = md * md * (nd * nd * nd - nd) - md * tie_total;
  if (denom <= 0.0) throw Error(ErrorCode::AllTied, "every rater tied all subjects");
  return 12.0 * s / denom;
}

CorrelationResult correlate_scores(const Eigen::Ref<const Eigen::VectorXd>& anomaly,
                                   const Eigen::Ref<const Eigen::VectorXd>& ratings,
                                   Method method) {
  require_same_length(anomaly.size(), ratings.size());
  if (anomaly.size() < 3) throw Error(ErrorCode::TooFewPoints, "need at least 3 decks");
  return method == Method::Pearson ? pearson_test(anomaly, ratings) : spearman(anomaly, ratings);
}

Reliability reliability(const RatingsMatrix& R) {
  return {cronbach_alpha(R), icc_2k(R), kendall_w(R)};
}

}  // namespace slideq::stats
