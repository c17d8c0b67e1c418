#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "slideq/error.hpp"
#include "slideq/metrics.hpp"

namespace slideq {

inline constexpr int kDefaultPcaComponents = 64;
inline constexpr double kScalerStdFloor = 1e-9;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {
inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": got " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(want));
  }
}
}  // namespace detail

/// Principal axes of a reference embedding set.
///
/// `components` is k x d with orthonormal rows ordered by decreasing
/// explained variance. Each row is sign-normalized so that its entry of
/// largest magnitude is positive, which makes the fit reproducible.
template <typename Scalar>
struct PcaModel {
  Vec<Scalar> mean;
  Mat<Scalar> components;
  Vec<Scalar> explained_variance;

  Eigen::Index k() const noexcept { return components.rows(); }
  Eigen::Index d() const noexcept { return components.cols(); }

  /// components * (e - mean)
  template <typename Derived>
  Vec<Scalar> project(const Eigen::MatrixBase<Derived>& e) const {
    detail::require_dim(e.size(), d(), "pca_project");
    return components * (e - mean);
  }

  /// Projects each row of X; returns n x k.
  template <typename Derived>
  Mat<Scalar> project_rows(const Eigen::MatrixBase<Derived>& X) const {
    detail::require_dim(X.cols(), d(), "pca_project");
    return (X.rowwise() - mean.transpose()) * components.transpose();
  }

  template <typename Derived>
  Vec<Scalar> reconstruct(const Eigen::MatrixBase<Derived>& coords) const {
    detail::require_dim(coords.size(), k(), "pca_reconstruct");
    return mean + components.transpose() * coords;
  }
};

using PcaModelD = PcaModel<double>;

/// Fits PCA on the rows of X by thin SVD of the centred data.
/// explained_variance = sigma^2 / (n - 1).
template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& X, Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "pca_fit: k must be >= 1");
  if (n < std::max<Eigen::Index>(k, 2)) {
    throw Error(ErrorCode::InsufficientData, "pca_fit: need n >= max(k,2), got n=" +
                                                 std::to_string(n) + ", k=" + std::to_string(k));
  }
  if (d < k) {
    throw Error(ErrorCode::InsufficientData, "pca_fit: k=" + std::to_string(k) +
                                                 " exceeds input dim " + std::to_string(d));
  }
  PcaModel<Scalar> model;
  model.mean = X.colwise().mean().transpose();
  const Mat<Scalar> centred = X.rowwise() - model.mean.transpose();
  if (centred.squaredNorm() == Scalar(0)) {
    throw Error(ErrorCode::DegenerateInput, "pca_fit: all rows identical");
  }
  Eigen::BDCSVD<Mat<Scalar>> svd(centred, Eigen::ComputeThinV);
  const Mat<Scalar>& v = svd.matrixV();
  model.components = v.leftCols(k).transpose();
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index arg = 0;
    model.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (model.components(i, arg) < Scalar(0)) model.components.row(i) *= Scalar(-1);
  }
  model.explained_variance =
      svd.singularValues().head(k).array().square() / static_cast<Scalar>(n - 1);
  return model;
}

/// Per-dimension standardization with population statistics.
/// Dimensions whose std falls below kScalerStdFloor store std = 1.
template <typename Scalar>
struct ZScaler {
  Vec<Scalar> mean;
  Vec<Scalar> std;

  Eigen::Index m() const noexcept { return mean.size(); }

  template <typename Derived>
  Vec<Scalar> apply(const Eigen::MatrixBase<Derived>& raw) const {
    detail::require_dim(raw.size(), m(), "scaler_apply");
    return ((raw - mean).array() / std.array()).matrix();
  }

  template <typename Derived>
  Mat<Scalar> apply_rows(const Eigen::MatrixBase<Derived>& D) const {
    detail::require_dim(D.cols(), m(), "scaler_apply");
    return ((D.rowwise() - mean.transpose()).array().rowwise() / std.array().transpose())
        .matrix();
  }

  template <typename Derived>
  Vec<Scalar> invert(const Eigen::MatrixBase<Derived>& z) const {
    detail::require_dim(z.size(), m(), "scaler_invert");
    return (z.array() * std.array()).matrix() + mean;
  }
};

using ZScalerD = ZScaler<double>;

template <typename Derived>
ZScaler<typename Derived::Scalar> scaler_fit(const Eigen::MatrixBase<Derived>& D) {
  using Scalar = typename Derived::Scalar;
  if (D.rows() < 2) {
    throw Error(ErrorCode::InsufficientData, "scaler_fit: need at least 2 rows");
  }
  ZScaler<Scalar> s;
  s.mean = D.colwise().mean().transpose();
  const Mat<Scalar> centred = D.rowwise() - s.mean.transpose();
  s.std = (centred.colwise().squaredNorm() / static_cast<Scalar>(D.rows())).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) {
    if (!(s.std(j) >= Scalar(kScalerStdFloor))) s.std(j) = Scalar(1);
  }
  return s;
}

/// [pca_coords | metrics], metrics in canonical order at indices k..k+6.
template <typename Derived>
Vec<typename Derived::Scalar> fuse(const Eigen::MatrixBase<Derived>& pca_coords,
                                   const MetricVector& metrics) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> out(pca_coords.size() + kMetricCount);
  out.head(pca_coords.size()) = pca_coords;
  out.tail(kMetricCount) = metrics.as_vector().template cast<Scalar>();
  return out;
}

/// First two PCA coordinates of each embedding (rows of E), for scatter plots.
template <typename Scalar, typename Derived>
std::vector<std::pair<Scalar, Scalar>> project2d(const PcaModel<Scalar>& pca,
                                                 const Eigen::MatrixBase<Derived>& E) {
  if (pca.k() < 2) throw Error(ErrorCode::InvalidArgument, "project2d needs k >= 2");
  detail::require_dim(E.cols(), pca.d(), "project2d");
  const Mat<Scalar> xy = (E.rowwise() - pca.mean.transpose()) * pca.components.topRows(2).transpose();
  std::vector<std::pair<Scalar, Scalar>> out;
  out.reserve(static_cast<std::size_t>(xy.rows()));
  for (Eigen::Index i = 0; i < xy.rows(); ++i) out.emplace_back(xy(i, 0), xy(i, 1));
  return out;
}

}  // namespace slideq
