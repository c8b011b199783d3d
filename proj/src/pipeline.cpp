#include "ragprune/pipeline.hpp"

#include "ragprune/pca.hpp"

#include <algorithm>
#include <future>
#include <unordered_set>

namespace ragprune {

void SweepConfig::validate() const {
  weighting.validate();
  if (method.kind == FeatureKind::polynomial && method.degree < 1) {
    throw ConfigError("polynomial degree must be >= 1");
  }
  if (!(percentile > 0.0 && percentile < 100.0)) throw ConfigError("percentile must lie in (0, 100)");
  if (cluster_counts.empty()) throw ConfigError("cluster list is empty");
  if (pca_dims.empty()) throw ConfigError("PCA dimension list is empty");
  for (const Index k : cluster_counts) {
    if (k < 1) throw ConfigError("cluster counts must be >= 1");
  }
  for (const Index r : pca_dims) {
    if (r < 1) throw ConfigError("PCA dimensions must be >= 1");
  }
  if (min_outlier_freq < 1) throw ConfigError("min outlier frequency must be >= 1");
  if (min_outlier_freq > cell_count()) {
    throw ConfigError("min outlier frequency " + std::to_string(min_outlier_freq) + " exceeds the " +
                      std::to_string(cell_count()) + " sweep cells");
  }
  if (num_docs < 1) throw ConfigError("num_docs must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(rel_tolerance > 0.0) || !(covariance_regularizer > 0.0)) {
    throw ConfigError("EM tolerance and covariance regularizer must be positive");
  }
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
}

std::uint64_t cell_seed(std::uint64_t base_seed, Index clusters, Index pca_dim) {
  const auto key = (static_cast<std::uint64_t>(clusters) << 32) ^ static_cast<std::uint64_t>(pca_dim);
  return base_seed ^ detail::splitmix64(key);
}

namespace {

SweepCell run_cell(const FeatureMatrix& standardized, Index clusters, Index pca_dim, const SweepConfig& config) {
  SweepCell cell;
  cell.clusters = clusters;
  cell.requested_dim = pca_dim;
  cell.seed = cell_seed(config.seed, clusters, pca_dim);

  if (standardized.cols() <= pca_dim) {
    cell.pca_skipped = true;
    cell.effective_dim = standardized.cols();
    cell.reduced = standardized.values;
  } else {
    cell.effective_dim = pca_dim;
    cell.reduced = pca_fit_transform(standardized.values, pca_dim).second;
  }

  GmmConfig gmm;
  gmm.components = clusters;
  gmm.max_iterations = config.max_iterations;
  gmm.rel_tolerance = config.rel_tolerance;
  gmm.covariance_regularizer = config.covariance_regularizer;
  gmm.seed = cell.seed;
  gmm.restarts = config.restarts;
  cell.model = gmm_fit(cell.reduced, gmm);

  const Eigen::VectorXd log_likelihoods = gmm_log_likelihood(cell.model, cell.reduced);
  cell.decision = detect_outliers(log_likelihoods, standardized.doc_ids, config.percentile);
  return cell;
}

}  // namespace

SweepResult run_sweep(const RetrievedSet& hits, const Centroid& centroid, const SweepConfig& config) {
  config.validate();
  const Index largest = *std::max_element(config.cluster_counts.begin(), config.cluster_counts.end());
  if (hits.size() < largest + 1) {
    throw DataError("sweep needs at least " + std::to_string(largest + 1) + " documents for " +
                    std::to_string(largest) + " clusters, got " + std::to_string(hits.size()));
  }

  const auto pairs = compute_distances(hits, centroid);
  SweepResult result;
  result.features = engineer_features(pairs, config.method, config.weighting, config.weighting_applies_to, hits.ids());
  auto [standardized, stats] = standardize(result.features);
  result.stats = std::move(stats);

  std::vector<std::future<SweepCell>> pending;
  for (const Index k : config.cluster_counts) {
    for (const Index r : config.pca_dims) {
      pending.push_back(std::async(std::launch::async, run_cell, std::cref(standardized), k, r, std::cref(config)));
    }
  }
  result.cells.reserve(pending.size());
  for (auto& cell : pending) result.cells.push_back(cell.get());
  return result;
}

Index VoteTally::count(const std::string& id) const {
  const auto it = counts.find(id);
  return it == counts.end() ? 0 : it->second;
}

std::set<std::string> outliers_from_tally(const VoteTally& tally, Index min_freq) {
  if (min_freq < 1) throw ConfigError("min outlier frequency must be >= 1");
  std::set<std::string> out;
  for (const auto& [id, count] : tally.counts) {
    if (count >= min_freq) out.insert(id);
  }
  return out;
}

VoteResult vote_outliers(const std::vector<OutlierDecision>& decisions, Index min_freq) {
  VoteResult result;
  result.tally.total_cells = static_cast<Index>(decisions.size());
  for (const auto& decision : decisions) {
    for (const auto& id : decision.outlier_ids) ++result.tally.counts[id];
  }
  result.outliers = outliers_from_tally(result.tally, min_freq);
  return result;
}

VoteResult vote_outliers(const std::vector<SweepCell>& cells, Index min_freq) {
  std::vector<OutlierDecision> decisions;
  decisions.reserve(cells.size());
  for (const auto& cell : cells) decisions.push_back(cell.decision);
  return vote_outliers(decisions, min_freq);
}

FilterResult filter_context(const RetrievedSet& hits, const std::set<std::string>& final_outliers) {
  const auto ids = hits.ids();
  const std::unordered_set<std::string> known(ids.begin(), ids.end());
  for (const auto& id : final_outliers) {
    if (!known.contains(id)) throw DataError("filter_context: unknown id '" + id + "'");
  }

  FilterResult result;
  for (const auto& id : ids) {
    (final_outliers.contains(id) ? result.dropped_ids : result.kept_ids).push_back(id);
  }
  result.original_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(result.kept_ids.size()));
  if (result.kept_ids.empty() && !ids.empty()) {
    result.warnings.push_back("every retrieved document was flagged as an outlier; context is empty");
  }
  return result;
}

FilterResult prune_context(const RetrievedSet& hits, const Centroid& centroid, const SweepConfig& config) {
  auto sweep = run_sweep(hits, centroid, config);
  auto votes = vote_outliers(sweep.cells, config.min_outlier_freq);
  auto result = filter_context(hits, votes.outliers);
  result.tally = std::move(votes.tally);
  result.cells = std::move(sweep.cells);
  if (!sweep.stats.constant_columns.empty()) {
    result.warnings.push_back(std::to_string(sweep.stats.constant_columns.size()) +
                              " constant feature column(s) standardized to zero");
  }
  return result;
}

}  // namespace ragprune
