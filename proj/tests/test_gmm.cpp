#include "fixtures.hpp"
#include "oracles.hpp"

#include "ragprune/gmm.hpp"

#include <doctest.h>

using namespace ragprune;

namespace {

// Random well-conditioned model plus points drawn near its means, so that the
// direct density sum stays far from underflow.
struct RandomCase {
  GmmModeld model;
  Eigen::MatrixXd points;
};

RandomCase random_case(oracle::Normal& normal, Eigen::Index k, Eigen::Index r, Eigen::Index n) {
  RandomCase out;
  out.model.weights = (normal.vector(k).array().abs() + 0.2).matrix();
  out.model.weights /= out.model.weights.sum();
  out.model.means = 3.0 * normal.matrix(k, r);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::MatrixXd a = normal.matrix(r, r);
    out.model.covariances.push_back(a * a.transpose() * 0.5 + 0.3 * Eigen::MatrixXd::Identity(r, r));
  }
  out.points.resize(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index c = static_cast<Eigen::Index>(normal.uniform() * static_cast<double>(k));
    out.points.row(i) = out.model.means.row(c) + 1.5 * normal.vector(r).transpose();
  }
  return out;
}

long double naive(const GmmModeld& model, const Eigen::RowVectorXd& x) {
  std::vector<long double> weights;
  std::vector<std::vector<long double>> means;
  std::vector<oracle::LongMatrix> covs;
  for (Eigen::Index c = 0; c < model.components(); ++c) {
    weights.push_back(model.weights(c));
    std::vector<long double> mu;
    for (Eigen::Index j = 0; j < model.dim(); ++j) mu.push_back(model.means(c, j));
    means.push_back(mu);
    covs.push_back(oracle::to_long(model.covariances[static_cast<std::size_t>(c)]));
  }
  std::vector<long double> point;
  for (Eigen::Index j = 0; j < x.size(); ++j) point.push_back(x(j));
  return oracle::naive_mixture_log_density(weights, means, covs, point);
}

}  // namespace

TEST_CASE("gmm: standard normal density at the mode") {
  GmmModeld model;
  model.weights = Eigen::VectorXd::Ones(1);
  model.means = Eigen::MatrixXd::Zero(1, 1);
  model.covariances = {Eigen::MatrixXd::Identity(1, 1)};
  const auto ll = gmm_log_likelihood(model, Eigen::MatrixXd::Zero(1, 1));
  CHECK(std::abs(ll(0) - (-0.9189385332046727)) <= 1e-9);
}

TEST_CASE("gmm: two identical components collapse to one") {
  oracle::Normal normal(3);
  const auto base = random_case(normal, 1, 3, 30);
  GmmModeld twin;
  twin.weights = Eigen::Vector2d(0.5, 0.5);
  twin.means.resize(2, 3);
  twin.means.row(0) = base.model.means.row(0);
  twin.means.row(1) = base.model.means.row(0);
  twin.covariances = {base.model.covariances[0], base.model.covariances[0]};
  const auto a = gmm_log_likelihood(base.model, base.points);
  const auto b = gmm_log_likelihood(twin, base.points);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gmm: log-likelihood matches direct density summation") {
  oracle::Normal normal(17);
  int compared = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_case(normal, 1 + trial % 4, 1 + trial % 3, 20);
    const auto ll = gmm_log_likelihood(c.model, c.points);
    for (Eigen::Index i = 0; i < c.points.rows(); ++i) {
      const long double expected = naive(c.model, c.points.row(i));
      REQUIRE(std::isfinite(static_cast<double>(expected)));
      CHECK(std::abs(ll(i) - static_cast<double>(expected)) <= 1e-9);
      ++compared;
    }
  }
  CHECK(compared == 200);
}

TEST_CASE("gmm: one component is the closed-form fit") {
  oracle::Normal normal(2);
  const Eigen::MatrixXd data = normal.matrix(40, 3) * normal.matrix(3, 3);
  GmmConfig config;
  config.components = 1;
  const auto model = gmm_fit(data, config);
  CHECK(model.weights.size() == 1);
  CHECK(std::abs(model.weights(0) - 1.0) <= 1e-12);
  const Eigen::RowVectorXd mean = data.colwise().mean();
  CHECK((model.means.row(0) - mean).cwiseAbs().maxCoeff() <= 1e-9);
  // Maximum-likelihood covariance (divisor N) plus the ridge.
  auto cov = oracle::covariance(data);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      const double ml = static_cast<double>(cov[a][b] * 39.0L / 40.0L) + (a == b ? 1e-6 : 0.0);
      CHECK(std::abs(model.covariances[0](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) - ml) <= 1e-8);
    }
  }
}

TEST_CASE("gmm: recovers two separated Gaussians") {
  const Eigen::Vector2d a(0, 0), b(10, 10);
  const auto data = fixtures::two_gaussians(2024, 500, a, b);
  GmmConfig config;
  config.components = 2;
  config.seed = 7;
  const auto model = gmm_fit(data, config);
  for (const auto& truth : {a, b}) {
    const double best = std::min((model.means.row(0).transpose() - truth).norm(),
                                 (model.means.row(1).transpose() - truth).norm());
    CHECK(best <= 0.15);
  }
  CHECK(std::abs(model.weights(0) - 0.5) <= 0.05);
  CHECK(model.converged);
}

TEST_CASE("gmm: EM never lowers the log-likelihood") {
  oracle::Normal normal(99);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(normal.uniform() * 100);
    const Eigen::Index r = 1 + trial % 4;
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(normal.uniform() * 6);
    Eigen::MatrixXd data = normal.matrix(n, r);
    data.topRows(n / 2).array() += 4.0;
    GmmConfig config;
    config.components = std::min(k, n);
    config.seed = static_cast<std::uint64_t>(trial);
    const auto model = gmm_fit(data, config);
    for (std::size_t i = 1; i < model.log_likelihood_trace.size(); ++i) {
      CHECK(model.log_likelihood_trace[i] >= model.log_likelihood_trace[i - 1] - 1e-9);
    }
    CHECK(model.final_log_likelihood == model.log_likelihood_trace.back());
  }
}

TEST_CASE("gmm: fitted parameters satisfy the model invariants") {
  oracle::Normal normal(4);
  const Eigen::MatrixXd data = normal.matrix(60, 3);
  GmmConfig config;
  config.components = 4;
  const auto model = gmm_fit(data, config);
  CHECK(std::abs(model.weights.sum() - 1.0) <= 1e-9);
  for (const auto& cov : model.covariances) {
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() > 0);
  }
  const auto resp = gmm_responsibilities(model, data);
  CHECK((resp.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  const auto labels = gmm_predict(model, data);
  for (auto label : labels) CHECK((label >= 0 && label < 4));
}

TEST_CASE("gmm: identical inputs give bitwise identical models") {
  const Eigen::MatrixXd data = oracle::Normal(6).matrix(50, 2);
  GmmConfig config;
  config.components = 3;
  config.seed = 123;
  const auto a = gmm_fit(data, config);
  const auto b = gmm_fit(data, config);
  CHECK(a.weights == b.weights);
  CHECK(a.means == b.means);
  for (std::size_t c = 0; c < a.covariances.size(); ++c) CHECK(a.covariances[c] == b.covariances[c]);
  CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
}

TEST_CASE("gmm: restarts keep the best fit") {
  const auto data = fixtures::two_gaussians(9, 200, Eigen::Vector2d(0, 0), Eigen::Vector2d(6, 0));
  GmmConfig config;
  config.components = 3;
  const auto single = gmm_fit(data, config);
  config.restarts = 4;
  const auto several = gmm_fit(data, config);
  CHECK(several.final_log_likelihood >= single.final_log_likelihood);
}

TEST_CASE("gmm: rejects bad input") {
  const Eigen::MatrixXd data = oracle::Normal(1).matrix(3, 2);
  GmmConfig config;
  config.components = 4;
  CHECK_THROWS_AS(gmm_fit(data, config), DataError);
  config.components = 0;
  CHECK_THROWS_AS(gmm_fit(data, config), ConfigError);
  config.components = 1;
  config.rel_tolerance = 0;
  CHECK_THROWS_AS(gmm_fit(data, config), ConfigError);
  config.rel_tolerance = 1e-6;
  Eigen::MatrixXd bad = data;
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gmm_fit(bad, config), DataError);

  GmmModeld model;
  model.weights = Eigen::VectorXd::Ones(1);
  model.means = Eigen::MatrixXd::Zero(1, 3);
  model.covariances = {Eigen::MatrixXd::Identity(3, 3)};
  CHECK_THROWS_AS(gmm_log_likelihood(model, data), DataError);
}

TEST_CASE("gmm: duplicate points do not break the fit") {
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(12, 2);
  data.bottomRows(6).setConstant(1.0);
  GmmConfig config;
  config.components = 3;
  const auto model = gmm_fit(data, config);
  CHECK(gmm_log_likelihood(model, data).allFinite());
}

TEST_CASE("gmm_select_k: criteria") {
  const auto data = fixtures::two_gaussians(31, 300, Eigen::Vector2d(0, 0), Eigen::Vector2d(8, 8));
  GmmConfig config;

  SUBCASE("a single candidate always wins") {
    const auto pick = gmm_select_k(data, {3}, InformationCriterion::bic, config);
    CHECK(pick.chosen == 3);
  }
  SUBCASE("BIC prefers two components on two clusters") {
    const auto pick = gmm_select_k(data, {1, 2}, InformationCriterion::bic, config);
    CHECK(pick.chosen == 2);
  }
  SUBCASE("BIC - AIC = p (ln N - 2)") {
    const auto pick = gmm_select_k(data, {1, 2, 3}, InformationCriterion::aic, config);
    for (const auto& s : pick.scores) {
      CHECK(s.free_parameters == gmm_free_parameters(s.components, 2));
      const double p = static_cast<double>(s.free_parameters);
      CHECK(std::abs((s.bic - s.aic) - p * (std::log(300.0) - 2.0)) <= 1e-9 * std::abs(s.bic));
    }
  }
  SUBCASE("empty candidate list") {
    CHECK_THROWS_AS(gmm_select_k(data, {}, InformationCriterion::bic, config), ConfigError);
  }
}

TEST_CASE("gmm: free parameter count") {
  CHECK(gmm_free_parameters(1, 1) == 2);
  CHECK(gmm_free_parameters(2, 2) == 1 + 4 + 6);
  CHECK(gmm_free_parameters(3, 3) == 2 + 9 + 18);
}
