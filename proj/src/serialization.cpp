#include "ragprune/serialization.hpp"

namespace ragprune {

namespace {

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json row_major(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

json cell_json(const SweepCell& cell) {
  return {{"clusters", cell.clusters},
          {"pca_dim", cell.requested_dim},
          {"effective_dim", cell.effective_dim},
          {"pca_skipped", cell.pca_skipped},
          {"seed", cell.seed},
          {"gmm_converged", cell.model.converged},
          {"gmm_iterations", cell.model.iterations},
          {"gmm_log_likelihood", cell.model.final_log_likelihood},
          {"decision", to_json(cell.decision)}};
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

}  // namespace

json to_json(const GmmModeld& model) {
  json covariances = json::array();
  for (const auto& c : model.covariances) covariances.push_back(row_major(c));
  return {{"components", model.components()},
          {"dim", model.dim()},
          {"weights", vector_json(model.weights)},
          {"means", row_major(model.means)},
          {"covariances", covariances},
          {"converged", model.converged},
          {"iterations", model.iterations},
          {"final_log_likelihood", model.final_log_likelihood}};
}

json to_json(const OutlierDecision& decision) {
  return {{"percentile", decision.percentile},
          {"threshold", decision.threshold},
          {"doc_ids", decision.doc_ids},
          {"log_likelihoods", vector_json(decision.log_likelihoods)},
          {"outlier_ids", decision.outlier_ids}};
}

json to_json(const VoteTally& tally) {
  json counts = json::object();
  for (const auto& [id, count] : tally.counts) counts[id] = count;
  return {{"total_cells", tally.total_cells}, {"counts", counts}};
}

json to_json(const FilterResult& result) {
  json cells = json::array();
  for (const auto& cell : result.cells) cells.push_back(cell_json(cell));
  return {{"kept_ids", result.kept_ids},
          {"dropped_ids", result.dropped_ids},
          {"original_ids", result.original_ids},
          {"tally", to_json(result.tally)},
          {"cells", cells},
          {"warnings", result.warnings}};
}

json to_json(const SweepConfig& config) {
  json cell_seeds = json::array();
  for (const Index k : config.cluster_counts) {
    for (const Index r : config.pca_dims) {
      cell_seeds.push_back({{"clusters", k}, {"pca_dim", r}, {"seed", cell_seed(config.seed, k, r)}});
    }
  }
  return {{"method", config.method.name()},
          {"degree", config.method.degree},
          {"alpha", config.weighting.alpha},
          {"epsilon", config.weighting.epsilon},
          {"weighting_applies_to", to_string(config.weighting_applies_to)},
          {"percentile", config.percentile},
          {"clusters", config.cluster_counts},
          {"pca_dims", config.pca_dims},
          {"min_freq", config.min_outlier_freq},
          {"num_docs", config.num_docs},
          {"seed", config.seed},
          {"max_iterations", config.max_iterations},
          {"rel_tolerance", config.rel_tolerance},
          {"covariance_regularizer", config.covariance_regularizer},
          {"restarts", config.restarts},
          {"cell_seeds", cell_seeds}};
}

SweepConfig sweep_config_from_json(const json& j, SweepConfig base) {
  if (!j.is_object()) throw ConfigError("sweep config must be a JSON object");
  SweepConfig c = std::move(base);
  const int degree = get_or<int>(j, "degree", c.method.degree);
  if (j.contains("method")) {
    c.method = parse_feature_method(get_or<std::string>(j, "method", c.method.name()), degree);
  } else {
    c.method.degree = degree;
  }
  c.weighting.alpha = get_or<double>(j, "alpha", c.weighting.alpha);
  c.weighting.epsilon = get_or<double>(j, "epsilon", c.weighting.epsilon);
  if (j.contains("weighting_applies_to")) {
    c.weighting_applies_to = parse_weighting_scope(get_or<std::string>(j, "weighting_applies_to", "all_methods"));
  }
  c.percentile = get_or<double>(j, "percentile", c.percentile);
  c.cluster_counts = get_or<std::vector<Index>>(j, "clusters", c.cluster_counts);
  c.pca_dims = get_or<std::vector<Index>>(j, "pca_dims", c.pca_dims);
  c.min_outlier_freq = get_or<Index>(j, "min_freq", c.min_outlier_freq);
  c.num_docs = get_or<Index>(j, "num_docs", c.num_docs);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.max_iterations = get_or<int>(j, "max_iterations", c.max_iterations);
  c.rel_tolerance = get_or<double>(j, "rel_tolerance", c.rel_tolerance);
  c.covariance_regularizer = get_or<double>(j, "covariance_regularizer", c.covariance_regularizer);
  c.restarts = get_or<int>(j, "restarts", c.restarts);
  return c;
}

}  // namespace ragprune
