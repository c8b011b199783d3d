#pragma once

#include "ragprune/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ragprune {

struct GmmConfig {
  Index components = 1;
  int max_iterations = 200;
  /// EM stops once the log-likelihood gain falls below
  /// rel_tolerance * max(|log-likelihood|, 1).
  double rel_tolerance = 1e-6;
  /// Added to every covariance diagonal in each M-step.
  double covariance_regularizer = 1e-6;
  std::uint64_t seed = 0;
  /// Independent k-means++ initializations; the best final fit is kept.
  int restarts = 1;
};

/// EM could not produce a usable model even with regularization.
class GmmFitError : public DataError {
public:
  using DataError::DataError;
};

/// Full-covariance Gaussian mixture.
template <typename Scalar>
struct GmmModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector weights;                  // K, sums to one
  Matrix means;                    // K x R
  std::vector<Matrix> covariances; // K of R x R, symmetric positive definite
  bool converged = false;
  int iterations = 0;
  Scalar final_log_likelihood = Scalar(0);
  /// Total log-likelihood after initialization and after every EM step.
  std::vector<Scalar> log_likelihood_trace;

  Index components() const { return weights.size(); }
  Index dim() const { return means.cols(); }
};

using GmmModeld = GmmModel<double>;

/// Number of free parameters of a K-component, R-dimensional full-covariance
/// mixture: (K - 1) weights, K*R means, K*R(R+1)/2 covariance entries.
inline Index gmm_free_parameters(Index components, Index dim) {
  return components - 1 + components * dim + components * dim * (dim + 1) / 2;
}

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename Derived>
void check_data(const Eigen::MatrixBase<Derived>& data, Index dim, const char* who) {
  if (data.cols() != dim) {
    throw DataError(std::string(who) + ": dimension mismatch, model has " +
                    std::to_string(dim) + " columns, data has " + std::to_string(data.cols()));
  }
  if (!data.allFinite()) {
    throw DataError(std::string(who) + ": data contains non-finite values");
  }
}

/// log(pi_k) + log N(x_i | mu_k, Sigma_k) for every point and component (N x K).
template <typename Scalar, typename Derived>
typename GmmModel<Scalar>::Matrix weighted_log_densities(const GmmModel<Scalar>& model,
                                                         const Eigen::MatrixBase<Derived>& data) {
  using Matrix = typename GmmModel<Scalar>::Matrix;
  const Index n = data.rows();
  const Index k = model.components();
  const Index r = model.dim();
  const Scalar log_two_pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);

  Matrix out(n, k);
  for (Index c = 0; c < k; ++c) {
    Eigen::LLT<Matrix> llt(model.covariances[c]);
    if (llt.info() != Eigen::Success) {
      throw GmmFitError("gmm: covariance of component " + std::to_string(c) +
                        " is not positive definite");
    }
    const Matrix factor = llt.matrixL();
    const Scalar log_det = Scalar(2) * factor.diagonal().array().log().sum();
    Matrix diff = (data.template cast<Scalar>().rowwise() - model.means.row(c)).transpose();
    llt.matrixL().solveInPlace(diff);
    const Scalar offset = std::log(model.weights(c)) - Scalar(0.5) * (Scalar(r) * log_two_pi + log_det);
    out.col(c) = (offset - Scalar(0.5) * diff.colwise().squaredNorm().array()).transpose();
  }
  return out;
}

/// Row-wise log(sum(exp(.))) with the row maximum factored out.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
row_log_sum_exp(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(values.rows());
  for (Index i = 0; i < values.rows(); ++i) {
    const Scalar peak = values.row(i).maxCoeff();
    if (!std::isfinite(peak)) {
      out(i) = peak;
      continue;
    }
    out(i) = peak + std::log((values.row(i).array() - peak).exp().sum());
  }
  return out;
}

template <typename Scalar>
struct EStep {
  typename GmmModel<Scalar>::Matrix responsibilities;
  Scalar log_likelihood;
};

template <typename Scalar, typename Derived>
EStep<Scalar> expectation(const GmmModel<Scalar>& model, const Eigen::MatrixBase<Derived>& data) {
  auto logp = weighted_log_densities(model, data);
  const auto totals = row_log_sum_exp(logp);
  logp.colwise() -= totals;
  EStep<Scalar> step{logp.array().exp().matrix(), totals.sum()};
  if (!std::isfinite(step.log_likelihood)) {
    throw GmmFitError("gmm: log-likelihood became non-finite");
  }
  return step;
}

/// Expected complete-data log-likelihood of one component's covariance, up to
/// the positive factor n_k / 2 and an additive constant.
template <typename Matrix>
std::optional<typename Matrix::Scalar> covariance_score(const Matrix& covariance,
                                                        const Matrix& scatter) {
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Matrix factor = llt.matrixL();
  const auto log_det = 2 * factor.diagonal().array().log().sum();
  const auto trace = llt.solve(scatter).trace();
  const auto score = -(log_det + trace);
  if (!std::isfinite(score)) return std::nullopt;
  return score;
}

/// M-step. When `previous` is given, each component keeps its old covariance
/// whenever the regularized estimate would lower the expected complete-data
/// log-likelihood, so every iteration is a generalized EM step and the
/// observed log-likelihood cannot decrease.
template <typename Scalar, typename Derived>
GmmModel<Scalar> maximization(const Eigen::MatrixBase<Derived>& data,
                              const typename GmmModel<Scalar>::Matrix& responsibilities,
                              Scalar regularizer, const GmmModel<Scalar>* previous,
                              const std::vector<Index>* seeds) {
  using Matrix = typename GmmModel<Scalar>::Matrix;
  using Vector = typename GmmModel<Scalar>::Vector;
  const Index r = data.cols();
  const Index k = responsibilities.cols();
  const Scalar floor = Scalar(10) * std::numeric_limits<Scalar>::epsilon();
  const Scalar negligible = Scalar(1e-10);

  const Vector raw = responsibilities.colwise().sum().transpose();
  const Vector mass = raw.array() + floor;

  GmmModel<Scalar> model;
  model.weights = mass / mass.sum();
  model.means.resize(k, r);
  model.covariances.resize(k);
  const Matrix ridge = regularizer * Matrix::Identity(r, r);

  for (Index c = 0; c < k; ++c) {
    if (raw(c) < negligible) {
      if (previous != nullptr) {
        model.means.row(c) = previous->means.row(c);
        model.covariances[c] = previous->covariances[c];
      } else {
        model.means.row(c) = data.row((*seeds)[c]).template cast<Scalar>();
        model.covariances[c] = ridge;
      }
      continue;
    }
    const auto weights = responsibilities.col(c);
    const Vector mean = (weights.transpose() * data.template cast<Scalar>()).transpose() / raw(c);
    const Matrix centered = data.template cast<Scalar>().rowwise() - mean.transpose();
    Matrix scatter =
        (centered.array().colwise() * weights.array()).matrix().transpose() * centered / raw(c);
    scatter = (scatter + scatter.transpose()) / Scalar(2);
    model.means.row(c) = mean.transpose();

    const Matrix candidate = scatter + ridge;
    const auto candidate_score = covariance_score(candidate, scatter);
    if (previous == nullptr) {
      if (!candidate_score) {
        throw GmmFitError("gmm: initial covariance of component " + std::to_string(c) +
                          " is singular after regularization");
      }
      model.covariances[c] = candidate;
      continue;
    }
    const auto kept_score = covariance_score(previous->covariances[c], scatter);
    if (candidate_score && (!kept_score || *candidate_score >= *kept_score)) {
      model.covariances[c] = candidate;
    } else if (kept_score) {
      model.covariances[c] = previous->covariances[c];
    } else {
      throw GmmFitError("gmm: covariance of component " + std::to_string(c) +
                        " is singular after regularization");
    }
  }
  return model;
}

/// k-means++ seeding: returns K row indices into `data`.
template <typename Derived>
std::vector<Index> kmeans_plus_plus(const Eigen::MatrixBase<Derived>& data, Index k,
                                    std::mt19937_64& rng) {
  using Scalar = typename Derived::Scalar;
  const Index n = data.rows();
  auto pick_uniform = [&] { return std::min<Index>(n - 1, static_cast<Index>(uniform01(rng) * n)); };

  std::vector<Index> seeds{pick_uniform()};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nearest =
      (data.rowwise() - data.row(seeds[0])).rowwise().squaredNorm();

  while (static_cast<Index>(seeds.size()) < k) {
    const Scalar total = nearest.sum();
    Index chosen = n - 1;
    if (!(total > Scalar(0))) {
      chosen = pick_uniform();
    } else {
      const Scalar target = Scalar(uniform01(rng)) * total;
      Scalar running = 0;
      for (Index i = 0; i < n; ++i) {
        if (nearest(i) <= Scalar(0)) continue;
        running += nearest(i);
        chosen = i;
        if (running > target) break;
      }
    }
    seeds.push_back(chosen);
    nearest = nearest.cwiseMin((data.rowwise() - data.row(chosen)).rowwise().squaredNorm());
  }
  return seeds;
}

template <typename Derived>
GmmModel<typename Derived::Scalar> fit_once(const Eigen::MatrixBase<Derived>& data,
                                            const GmmConfig& config, std::uint64_t seed) {
  using Scalar = typename Derived::Scalar;
  using Matrix = typename GmmModel<Scalar>::Matrix;
  const Index n = data.rows();
  const Index k = config.components;
  const auto regularizer = static_cast<Scalar>(config.covariance_regularizer);

  std::mt19937_64 rng(seed);
  const auto seeds = kmeans_plus_plus(data, k, rng);

  Matrix hard = Matrix::Zero(n, k);
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    Scalar best_distance = std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < k; ++c) {
      const Scalar d = (data.row(i) - data.row(seeds[c])).squaredNorm();
      if (d < best_distance) {
        best_distance = d;
        best = c;
      }
    }
    hard(i, best) = Scalar(1);
  }

  GmmModel<Scalar> model = maximization<Scalar>(data, hard, regularizer, nullptr, &seeds);
  auto step = expectation(model, data);
  std::vector<Scalar> trace{step.log_likelihood};

  bool converged = false;
  int iterations = 0;
  while (iterations < config.max_iterations) {
    model = maximization<Scalar>(data, step.responsibilities, regularizer, &model, &seeds);
    const Scalar previous = step.log_likelihood;
    step = expectation(model, data);
    trace.push_back(step.log_likelihood);
    ++iterations;
    const Scalar gain = step.log_likelihood - previous;
    if (std::abs(gain) <= Scalar(config.rel_tolerance) * std::max(std::abs(previous), Scalar(1))) {
      converged = true;
      break;
    }
  }

  model.converged = converged;
  model.iterations = iterations;
  model.final_log_likelihood = step.log_likelihood;
  model.log_likelihood_trace = std::move(trace);
  return model;
}

}  // namespace detail

/// Fits a full-covariance Gaussian mixture by EM, initialized with seeded
/// k-means++ and a hard assignment to the nearest seed.
template <typename Derived>
GmmModel<typename Derived::Scalar> gmm_fit(const Eigen::MatrixBase<Derived>& data,
                                           const GmmConfig& config) {
  if (config.components < 1) throw ConfigError("gmm: component count must be >= 1");
  if (config.max_iterations < 1) throw ConfigError("gmm: max_iterations must be >= 1");
  if (!(config.rel_tolerance > 0) || !(config.covariance_regularizer > 0)) {
    throw ConfigError("gmm: tolerance and regularizer must be positive");
  }
  if (config.restarts < 1) throw ConfigError("gmm: restarts must be >= 1");
  if (data.rows() < config.components) {
    throw DataError("gmm: " + std::to_string(data.rows()) + " points cannot support " +
                    std::to_string(config.components) + " components");
  }
  if (data.cols() < 1) throw DataError("gmm: data has no columns");
  detail::check_data(data, data.cols(), "gmm_fit");

  std::optional<GmmModel<typename Derived::Scalar>> best;
  for (int restart = 0; restart < config.restarts; ++restart) {
    const std::uint64_t seed =
        restart == 0 ? config.seed : detail::splitmix64(config.seed + static_cast<std::uint64_t>(restart));
    auto model = detail::fit_once(data, config, seed);
    if (!best || model.final_log_likelihood > best->final_log_likelihood) best = std::move(model);
  }
  return std::move(*best);
}

/// log p(x_i) under the mixture, one entry per row of `data`.
template <typename Scalar, typename Derived>
typename GmmModel<Scalar>::Vector gmm_log_likelihood(const GmmModel<Scalar>& model,
                                                     const Eigen::MatrixBase<Derived>& data) {
  detail::check_data(data, model.dim(), "gmm_log_likelihood");
  return detail::row_log_sum_exp(detail::weighted_log_densities(model, data));
}

/// Posterior component probabilities, N x K.
template <typename Scalar, typename Derived>
typename GmmModel<Scalar>::Matrix gmm_responsibilities(const GmmModel<Scalar>& model,
                                                       const Eigen::MatrixBase<Derived>& data) {
  detail::check_data(data, model.dim(), "gmm_responsibilities");
  return detail::expectation(model, data).responsibilities;
}

/// Index of the most probable component for each row.
template <typename Scalar, typename Derived>
std::vector<Index> gmm_predict(const GmmModel<Scalar>& model, const Eigen::MatrixBase<Derived>& data) {
  detail::check_data(data, model.dim(), "gmm_predict");
  const auto logp = detail::weighted_log_densities(model, data);
  std::vector<Index> labels(static_cast<std::size_t>(logp.rows()));
  for (Index i = 0; i < logp.rows(); ++i) logp.row(i).maxCoeff(&labels[static_cast<std::size_t>(i)]);
  return labels;
}

enum class InformationCriterion { bic, aic };

struct CandidateScore {
  Index components = 0;
  double log_likelihood = 0;
  Index free_parameters = 0;
  double bic = 0;
  double aic = 0;
};

struct ModelSelection {
  Index chosen = 0;
  std::vector<CandidateScore> scores;
};

/// Fits every candidate component count and keeps the one with the smallest
/// criterion value (ties go to the smaller K).
template <typename Derived>
ModelSelection gmm_select_k(const Eigen::MatrixBase<Derived>& data, const std::vector<Index>& candidates,
                            InformationCriterion criterion, GmmConfig config) {
  if (candidates.empty()) throw ConfigError("gmm_select_k: empty candidate list");
  const double n = static_cast<double>(data.rows());
  ModelSelection selection;
  double best = std::numeric_limits<double>::infinity();
  for (const Index k : candidates) {
    config.components = k;
    const auto model = gmm_fit(data, config);
    CandidateScore score;
    score.components = k;
    score.log_likelihood = static_cast<double>(model.final_log_likelihood);
    score.free_parameters = gmm_free_parameters(k, data.cols());
    const double p = static_cast<double>(score.free_parameters);
    score.bic = p * std::log(n) - 2.0 * score.log_likelihood;
    score.aic = 2.0 * p - 2.0 * score.log_likelihood;
    const double value = criterion == InformationCriterion::bic ? score.bic : score.aic;
    if (value < best || (value == best && k < selection.chosen)) {
      best = value;
      selection.chosen = k;
    }
    selection.scores.push_back(score);
  }
  return selection;
}

}  // namespace ragprune
