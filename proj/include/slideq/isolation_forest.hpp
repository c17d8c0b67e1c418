#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace slideq {

using Descriptor = Eigen::VectorXd;
using DescriptorMatrix = Eigen::MatrixXd;  // one descriptor per row

/// Expected path length of an unsuccessful BST search among n points:
/// c(1) = 0, c(2) = 1, c(n) = 2 H(n-1) - 2 (n-1)/n with H summed exactly.
double c_factor(std::int64_t n);

/// Exact harmonic number H(m) = sum_{i=1..m} 1/i, summed from the smallest
/// term upwards.
double harmonic(std::int64_t m);

struct ForestParams {
  int trees = 200;
  int subsample = 256;
  double contamination = 0.10;
  std::uint64_t seed = 42;
  int height_limit = 0;  // 0: ceil(log2(subsample))

  int resolved_height_limit() const;
  void validate() const;
};

/// Random stream for one tree. Seeded from (seed, tree index) so trees can
/// be built independently and in any order.
///
/// Draw order per tree: `subsample` draws for a partial Fisher-Yates
/// selection of rows, then per internal node (pre-order, left before right)
/// one draw for the split feature among non-constant features (ascending
/// index order) and one draw for the split value.
class ForestRng {
 public:
  ForestRng(std::uint64_t seed, std::uint64_t tree_index);

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound) by rejection, bound >= 1.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform real in (0,1).
  double open01();

 private:
  std::mt19937_64 engine_;
};

struct IsoNode {
  int feature = -1;  // -1 marks an external node
  double split = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;  // sample count reaching an external node

  bool external() const noexcept { return feature < 0; }
};

/// One isolation tree stored as a node arena; node 0 is the root.
class IsoTree {
 public:
  IsoTree() = default;
  explicit IsoTree(std::vector<IsoNode> nodes) : nodes_(std::move(nodes)) {}

  /// Builds from the rows of `sample` (x[q] < split goes left).
  static IsoTree build(const DescriptorMatrix& sample, int height_limit, ForestRng& rng);

  /// Edges traversed plus c(size) at the external node reached.
  double path_length(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int depth() const;

  const std::vector<IsoNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<IsoNode> nodes_;
};

struct ForestScore {
  double anomaly = 0.0;      // a(x) in [0,1]
  double mean_path = 0.0;    // average path length over trees
};

/// a = clip(0.5 - d, 0, 1) with d = 0.5 - 2^(-mean_path / c_psi).
double anomaly_from_path(double mean_path, double c_psi);

/// Value at quantile q of `values` with linear interpolation between order
/// statistics (position q * (n - 1)).
double quantile_linear(std::vector<double> values, double q);

class IsolationForest {
 public:
  IsolationForest() = default;
  IsolationForest(std::vector<IsoTree> trees, ForestParams params, Eigen::Index dim,
                  double flag_threshold);

  static IsolationForest fit(const DescriptorMatrix& X, const ForestParams& params);

  ForestScore score(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool flagged(double anomaly) const noexcept { return anomaly >= flag_threshold_; }

  const std::vector<IsoTree>& trees() const noexcept { return trees_; }
  const ForestParams& params() const noexcept { return params_; }
  Eigen::Index dim() const noexcept { return dim_; }
  double c_psi() const noexcept { return c_psi_; }
  double flag_threshold() const noexcept { return flag_threshold_; }

 private:
  std::vector<IsoTree> trees_;
  ForestParams params_;
  Eigen::Index dim_ = 0;
  double c_psi_ = 0.0;
  double flag_threshold_ = 1.0;
};

/// Mean descriptor of the reference set; anomaly is Euclidean distance to it.
struct CentroidModel {
  Eigen::VectorXd centroid;

  static CentroidModel fit(const DescriptorMatrix& X);
  double score(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct SlideScore {
  std::string key;
  double anomaly = 0.0;
  std::optional<bool> flagged;       // forest scorer only
  std::optional<double> mean_path;   // forest scorer only
};

struct AnomalyReport {
  std::vector<SlideScore> slides;
  double deck_score = 0.0;  // arithmetic mean of slide anomalies
};

AnomalyReport score_deck(const IsolationForest& forest, const DescriptorMatrix& slides,
                         const std::vector<std::string>& keys);
AnomalyReport score_deck(const CentroidModel& centroid, const DescriptorMatrix& slides,
                         const std::vector<std::string>& keys);

}  // namespace slideq
