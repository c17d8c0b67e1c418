#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace slideq::stats {

/// Subjects x raters, no missing cells.
struct RatingsMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> subjects;
  std::vector<std::string> raters;

  /// Validates shape (>= 2 x 2), finiteness and label counts (empty label
  /// lists are filled with 1-based indices).
  RatingsMatrix(Eigen::MatrixXd v, std::vector<std::string> subject_labels = {},
                std::vector<std::string> rater_labels = {});

  Eigen::Index n_subjects() const noexcept { return values.rows(); }
  Eigen::Index n_raters() const noexcept { return values.cols(); }
  /// Unweighted mean over raters, per subject.
  Eigen::VectorXd subject_means() const { return values.rowwise().mean(); }
};

enum class Method { Pearson, Spearman };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct CorrelationResult {
  double coefficient = 0.0;
  double p_value = 1.0;
  std::optional<double> ci_low;   // defined for n >= 4 and |r| < 1
  std::optional<double> ci_high;
  int n = 0;
  Method method = Method::Spearman;
  bool exact_p = false;  // permutation p rather than t-approximation
};

inline constexpr int kExactPermutationMaxN = 8;

/// Average (mid) ranks, 1-based.
Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Sample product-moment correlation.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Two-sided p for a correlation via t = r sqrt((n-2)/(1-r^2)), df = n-2.
double correlation_t_pvalue(double r, int n);

/// Pearson with t-approximation p and Fisher-z interval.
CorrelationResult pearson_test(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Eigen::Ref<const Eigen::VectorXd>& y, double level = 0.95);

/// Spearman rho (Pearson on average ranks). For n <= 8 the two-sided p is
/// exact: the share of all n! rearrangements of y's ranks whose |rho| is at
/// least the observed |rho|. Larger n uses the t-approximation.
CorrelationResult spearman(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y, double level = 0.95);

/// Exact permutation p for Spearman; exposed for testing.
double spearman_exact_pvalue(const Eigen::Ref<const Eigen::VectorXd>& x_ranks,
                             const Eigen::Ref<const Eigen::VectorXd>& y_ranks);

/// Fisher z interval: tanh(atanh(r) +- z_{(1+level)/2} / sqrt(n - 3)).
std::pair<double, double> fisher_ci(double r, int n, double level = 0.95);

double cronbach_alpha(const RatingsMatrix& R);
double icc_2k(const RatingsMatrix& R);
double kendall_w(const RatingsMatrix& R);

/// Correlates per-deck anomaly scores with per-deck mean ratings. Signs are
/// kept as-is; negate the scores for rating-direction comparisons.
CorrelationResult correlate_scores(const Eigen::Ref<const Eigen::VectorXd>& anomaly,
                                   const Eigen::Ref<const Eigen::VectorXd>& ratings,
                                   Method method);

struct Reliability {
  double cronbach_alpha = 0.0;
  double icc_2k = 0.0;
  double kendall_w = 0.0;
};

Reliability reliability(const RatingsMatrix& R);

}  // namespace slideq::stats
