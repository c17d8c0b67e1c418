#include "slideq/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slideq/embedding.hpp"
#include "slideq/error.hpp"
#include "slideq/parallel.hpp"

namespace slideq {
namespace {

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": got dim " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(want));
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const DescriptorMatrix& sample, int height_limit, ForestRng& rng)
      : sample_(sample), height_limit_(height_limit), rng_(rng) {}

  std::vector<IsoNode> run() {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(sample_.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(const std::vector<Eigen::Index>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const auto leaf = [&] {
      nodes_[static_cast<std::size_t>(id)].size = static_cast<int>(rows.size());
      return id;
    };
    if (depth >= height_limit_ || rows.size() <= 1) return leaf();

    const Eigen::Index dims = sample_.cols();
    std::vector<int> candidates;
    std::vector<double> lo(static_cast<std::size_t>(dims)), hi(static_cast<std::size_t>(dims));
    for (Eigen::Index q = 0; q < dims; ++q) {
      double mn = sample_(rows[0], q), mx = mn;
      for (Eigen::Index r : rows) {
        mn = std::min(mn, sample_(r, q));
        mx = std::max(mx, sample_(r, q));
      }
      lo[static_cast<std::size_t>(q)] = mn;
      hi[static_cast<std::size_t>(q)] = mx;
      if (mx > mn) candidates.push_back(static_cast<int>(q));
    }
    if (candidates.empty()) return leaf();

    const int q = candidates[static_cast<std::size_t>(rng_.below(candidates.size()))];
    const double mn = lo[static_cast<std::size_t>(q)];
    const double mx = hi[static_cast<std::size_t>(q)];
    double split = mn + rng_.open01() * (mx - mn);
    if (!(split > mn && split < mx)) split = mn + 0.5 * (mx - mn);
    if (!(split > mn)) split = mx;  // adjacent doubles: x < mx still separates

    std::vector<Eigen::Index> left, right;
    for (Eigen::Index r : rows) (sample_(r, q) < split ? left : right).push_back(r);

    const int l = grow(left, depth + 1);
    const int rgt = grow(right, depth + 1);
    IsoNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = q;
    node.split = split;
    node.left = l;
    node.right = rgt;
    return id;
  }

  const DescriptorMatrix& sample_;
  int height_limit_;
  ForestRng& rng_;
  std::vector<IsoNode> nodes_;
};

}  // namespace

double harmonic(std::int64_t m) {
  double h = 0.0;
  for (std::int64_t i = m; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return h;
}

double c_factor(std::int64_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double nd = static_cast<double>(n);
  return 2.0 * harmonic(n - 1) - 2.0 * (nd - 1.0) / nd;
}

int ForestParams::resolved_height_limit() const {
  if (height_limit > 0) return height_limit;
  return std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample)))));
}

void ForestParams::validate() const {
  if (trees < 1) throw Error(ErrorCode::InvalidArgument, "trees must be >= 1");
  if (subsample < 2) throw Error(ErrorCode::InvalidArgument, "subsample must be >= 2");
  if (!(contamination > 0.0 && contamination <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "contamination must be in (0, 0.5]");
  }
  if (height_limit < 0) throw Error(ErrorCode::InvalidArgument, "height_limit must be >= 1");
}

ForestRng::ForestRng(std::uint64_t seed, std::uint64_t tree_index) {
  SplitMix64 mix(seed);
  SplitMix64 per_tree(mix.next() ^ (tree_index * 0xd1342543de82ef95ULL + 1));
  engine_.seed(per_tree.next());
}

std::uint64_t ForestRng::below(std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

double ForestRng::open01() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

IsoTree IsoTree::build(const DescriptorMatrix& sample, int height_limit, ForestRng& rng) {
  if (sample.rows() == 0) throw Error(ErrorCode::InsufficientData, "empty tree sample");
  if (height_limit < 1) throw Error(ErrorCode::InvalidArgument, "height_limit must be >= 1");
  return IsoTree(TreeBuilder(sample, height_limit, rng).run());
}

double IsoTree::path_length(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  int id = 0;
  int edges = 0;
  for (;;) {
    const IsoNode& node = nodes_[static_cast<std::size_t>(id)];
    if (node.external()) return edges + c_factor(node.size);
    if (node.feature >= x.size()) {
      throw Error(ErrorCode::DimensionMismatch, "descriptor shorter than split feature");
    }
    id = x(node.feature) < node.split ? node.left : node.right;
    ++edges;
  }
}

int IsoTree::depth() const {
  // Children always follow their parent in the arena.
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const IsoNode& n = nodes_[i];
    deepest = std::max(deepest, level[i]);
    if (n.external()) continue;
    level[static_cast<std::size_t>(n.left)] = level[i] + 1;
    level[static_cast<std::size_t>(n.right)] = level[i] + 1;
  }
  return deepest;
}

double anomaly_from_path(double mean_path, double c_psi) {
  // 0.5 - d simplifies to 2^(-mean_path / c_psi); evaluating it directly
  // avoids cancelling small scores to zero.
  return std::clamp(std::exp2(-mean_path / c_psi), 0.0, 1.0);
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InsufficientData, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

IsolationForest::IsolationForest(std::vector<IsoTree> trees, ForestParams params,
                                 Eigen::Index dim, double flag_threshold)
    : trees_(std::move(trees)),
      params_(params),
      dim_(dim),
      c_psi_(c_factor(params.subsample)),
      flag_threshold_(flag_threshold) {}

IsolationForest IsolationForest::fit(const DescriptorMatrix& X, const ForestParams& params) {
  params.validate();
  const Eigen::Index n = X.rows();
  if (n < params.subsample) {
    throw Error(ErrorCode::InsufficientData, "forest_fit: " + std::to_string(n) +
                                                 " rows but subsample is " +
                                                 std::to_string(params.subsample));
  }
  const int limit = params.resolved_height_limit();
  std::vector<IsoTree> trees(static_cast<std::size_t>(params.trees));
  parallel_for(trees.size(), [&](std::size_t t) {
    ForestRng rng(params.seed, t);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    DescriptorMatrix sample(params.subsample, X.cols());
    for (int i = 0; i < params.subsample; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      sample.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    }
    trees[t] = IsoTree::build(sample, limit, rng);
  });

  IsolationForest forest(std::move(trees), params, X.cols(), 1.0);
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = forest.score(X.row(i).transpose()).anomaly;
  }
  forest.flag_threshold_ = quantile_linear(std::move(scores), 1.0 - params.contamination);
  return forest;
}

ForestScore IsolationForest::score(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require_dim(x.size(), dim_, "forest score");
  double total = 0.0;
  for (const IsoTree& t : trees_) total += t.path_length(x);
  const double mean = total / static_cast<double>(trees_.size());
  return {anomaly_from_path(mean, c_psi_), mean};
}

CentroidModel CentroidModel::fit(const DescriptorMatrix& X) {
  if (X.rows() < 1) throw Error(ErrorCode::InsufficientData, "centroid of empty set");
  return {X.colwise().mean().transpose()};
}

double CentroidModel::score(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  require_dim(x.size(), centroid.size(), "centroid score");
  return (x - centroid).norm();
}

namespace {

template <typename ScoreOne>
AnomalyReport score_rows(const DescriptorMatrix& slides, const std::vector<std::string>& keys,
                         ScoreOne&& one) {
  if (slides.rows() == 0) throw Error(ErrorCode::EmptyDeck, "deck has no slides");
  if (static_cast<Eigen::Index>(keys.size()) != slides.rows()) {
    throw Error(ErrorCode::LengthMismatch, "one key per slide required");
  }
  AnomalyReport report;
  report.slides.reserve(keys.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < slides.rows(); ++i) {
    SlideScore s = one(slides.row(i).transpose());
    s.key = keys[static_cast<std::size_t>(i)];
    total += s.anomaly;
    report.slides.push_back(std::move(s));
  }
  report.deck_score = total / static_cast<double>(slides.rows());
  return report;
}

}  // namespace

AnomalyReport score_deck(const IsolationForest& forest, const DescriptorMatrix& slides,
                         const std::vector<std::string>& keys) {
  return score_rows(slides, keys, [&](const Eigen::VectorXd& x) {
    const ForestScore fs = forest.score(x);
    return SlideScore{{}, fs.anomaly, forest.flagged(fs.anomaly), fs.mean_path};
  });
}

AnomalyReport score_deck(const CentroidModel& centroid, const DescriptorMatrix& slides,
                         const std::vector<std::string>& keys) {
  return score_rows(slides, keys, [&](const Eigen::VectorXd& x) {
    return SlideScore{{}, centroid.score(x), std::nullopt, std::nullopt};
  });
}

}  // namespace slideq
