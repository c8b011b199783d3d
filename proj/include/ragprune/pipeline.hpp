#pragma once

#include "ragprune/features.hpp"
#include "ragprune/gmm.hpp"
#include "ragprune/outliers.hpp"
#include "ragprune/vector_store.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ragprune {

struct SweepConfig {
  FeatureMethod method = FeatureMethod::interaction();
  WeightingParams weighting;
  WeightingScope weighting_applies_to = WeightingScope::all_methods;
  double percentile = 15.0;
  std::vector<Index> cluster_counts{4, 5, 6};
  std::vector<Index> pca_dims{2, 3};
  Index min_outlier_freq = 2;
  Index num_docs = 20;
  std::uint64_t seed = 42;

  // EM settings shared by every cell; the seed is derived per cell.
  int max_iterations = 200;
  double rel_tolerance = 1e-6;
  double covariance_regularizer = 1e-6;
  int restarts = 1;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
  Index cell_count() const {
    return static_cast<Index>(cluster_counts.size() * pca_dims.size());
  }
};

/// Seed of the (K, R) sweep cell: base seed XOR a stable hash of the pair.
std::uint64_t cell_seed(std::uint64_t base_seed, Index clusters, Index pca_dim);

struct SweepCell {
  Index clusters = 0;
  Index requested_dim = 0;
  /// Dimension the mixture was fitted in; equals the feature count when
  /// PCA was skipped because F <= requested_dim.
  Index effective_dim = 0;
  bool pca_skipped = false;
  std::uint64_t seed = 0;
  Eigen::MatrixXd reduced;  // N x effective_dim
  GmmModeld model;
  OutlierDecision decision;
};

struct SweepResult {
  FeatureMatrix features;       // before standardization
  StandardizationStats stats;
  std::vector<SweepCell> cells; // (K, R) lexicographic by config order
};

/// Runs one outlier decision per (cluster count, PCA dimension) pair. Cells
/// run concurrently; results are ordered by the config lists.
SweepResult run_sweep(const RetrievedSet& hits, const Centroid& centroid, const SweepConfig& config);

struct VoteTally {
  std::map<std::string, Index> counts;  // only ids flagged at least once
  Index total_cells = 0;

  Index count(const std::string& id) const;
};

struct VoteResult {
  VoteTally tally;
  std::set<std::string> outliers;
};

/// Final outliers are the ids flagged by at least `min_freq` cells.
VoteResult vote_outliers(const std::vector<SweepCell>& cells, Index min_freq);
VoteResult vote_outliers(const std::vector<OutlierDecision>& decisions, Index min_freq);
std::set<std::string> outliers_from_tally(const VoteTally& tally, Index min_freq);

struct FilterResult {
  std::vector<std::string> kept_ids;      // retrieval order
  std::vector<std::string> dropped_ids;   // retrieval order
  std::vector<std::string> original_ids;  // first |kept_ids| retrieved ids
  VoteTally tally;
  std::vector<SweepCell> cells;
  std::vector<std::string> warnings;
};

/// Removes `final_outliers` from the retrieved list without reordering.
FilterResult filter_context(const RetrievedSet& hits, const std::set<std::string>& final_outliers);

/// run_sweep + vote_outliers + filter_context.
FilterResult prune_context(const RetrievedSet& hits, const Centroid& centroid, const SweepConfig& config);

}  // namespace ragprune
