#pragma once

#include "ragprune/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace ragprune {

/// Principal axes of a data matrix (rows are observations).
template <typename Scalar>
struct PcaModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector mean;                 // length F
  Matrix components;           // R x F, orthonormal rows
  Vector explained_variance;   // length R, nonincreasing

  Index input_dim() const { return components.cols(); }
  Index output_dim() const { return components.rows(); }

  template <typename Derived>
  Matrix transform(const Eigen::MatrixBase<Derived>& data) const {
    return (data.rowwise() - mean.transpose()) * components.transpose();
  }
};

using PcaModeld = PcaModel<double>;

/// Sample covariance (divisor N - 1) of the rows of `data`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
sample_covariance(const Eigen::MatrixBase<Derived>& data) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Index n = data.rows();
  const Matrix centered = data.rowwise() - data.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / Scalar(n - 1);
  return (cov + cov.transpose()) / Scalar(2);
}

/// Fits the top `target_dim` principal axes from the eigendecomposition of
/// the sample covariance. Each axis is signed so that its entry of largest
/// magnitude is positive (first such entry on ties).
template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& data,
                                           Index target_dim) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename PcaModel<Scalar>::Matrix;

  const Index n = data.rows();
  const Index f = data.cols();
  if (n < 2) {
    throw DataError("pca: need at least 2 observations, got " + std::to_string(n));
  }
  if (target_dim < 1 || target_dim > std::min<Index>(n - 1, f)) {
    throw ConfigError("pca: target dimension " + std::to_string(target_dim) +
                      " outside [1, " + std::to_string(std::min<Index>(n - 1, f)) + "]");
  }
  if (!data.allFinite()) {
    throw DataError("pca: input contains non-finite values");
  }

  const Matrix cov = sample_covariance(data);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw DataError("pca: eigendecomposition failed");
  }

  PcaModel<Scalar> model;
  model.mean = data.colwise().mean().transpose();
  model.components.resize(target_dim, f);
  model.explained_variance.resize(target_dim);

  // Eigen returns eigenvalues in increasing order.
  for (Index r = 0; r < target_dim; ++r) {
    const Index src = f - 1 - r;
    auto axis = solver.eigenvectors().col(src);
    Index pivot = 0;
    for (Index j = 1; j < f; ++j) {
      if (std::abs(axis(j)) > std::abs(axis(pivot))) pivot = j;
    }
    const Scalar sign = axis(pivot) < Scalar(0) ? Scalar(-1) : Scalar(1);
    model.components.row(r) = sign * axis.transpose();
    model.explained_variance(r) = std::max(solver.eigenvalues()(src), Scalar(0));
  }
  return model;
}

template <typename Derived>
std::pair<PcaModel<typename Derived::Scalar>,
          typename PcaModel<typename Derived::Scalar>::Matrix>
pca_fit_transform(const Eigen::MatrixBase<Derived>& data, Index target_dim) {
  auto model = pca_fit(data, target_dim);
  auto reduced = model.transform(data);
  return {std::move(model), std::move(reduced)};
}

}  // namespace ragprune
