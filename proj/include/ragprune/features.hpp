#pragma once

#include "ragprune/common.hpp"
#include "ragprune/vector_store.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ragprune {

/// Euclidean distances of one document to the centroid and to the query.
struct DistancePair {
  double centroid = 0;
  double query = 0;
};

enum class FeatureKind { concatenate, weighted_sum, interaction, polynomial };

struct FeatureMethod {
  FeatureKind kind = FeatureKind::interaction;
  int degree = 2;  // polynomial only

  static FeatureMethod concatenate() { return {FeatureKind::concatenate, 1}; }
  static FeatureMethod weighted_sum() { return {FeatureKind::weighted_sum, 1}; }
  static FeatureMethod interaction() { return {FeatureKind::interaction, 1}; }
  static FeatureMethod polynomial(int degree) { return {FeatureKind::polynomial, degree}; }

  /// Columns produced by build_features.
  Index feature_count() const;
  /// "concatenate", "weighted_sum", "interaction" or "polynomial".
  std::string name() const;

  friend bool operator==(const FeatureMethod&, const FeatureMethod&) = default;
};

/// Accepts the names above; polynomial degree may be given as "polynomial:3".
FeatureMethod parse_feature_method(std::string_view text, int default_degree = 2);

struct WeightingParams {
  double alpha = 0.5;    // 0 weights only the centroid distance, 1 only the query distance
  double epsilon = 1e-8;

  void validate() const;
};

/// Whether the alpha-weighted pair feeds the concatenate, interaction and
/// polynomial methods. weighted_sum always uses raw distances.
enum class WeightingScope { all_methods, none };

std::string to_string(WeightingScope scope);
WeightingScope parse_weighting_scope(std::string_view text);

struct FeatureMatrix {
  Eigen::MatrixXd values;  // N x F
  FeatureMethod method;
  std::vector<std::string> doc_ids;  // aligned with rows; may be empty

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

struct StandardizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population standard deviation
  std::vector<Index> constant_columns;
};

std::vector<DistancePair> compute_distances(const RetrievedSet& hits, const Centroid& centroid);

/// Row-wise distances of `vectors` (N x D) to `centroid` and `query`.
std::vector<DistancePair> compute_distances(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                                            const Eigen::Ref<const Eigen::VectorXd>& centroid,
                                            const Eigen::Ref<const Eigen::VectorXd>& query);

/// (d_centroid * (1 - alpha), d_query * alpha)
std::vector<DistancePair> apply_weighting(std::span<const DistancePair> pairs,
                                          const WeightingParams& params);

/// Feature rows from distance pairs, taken as given:
///   concatenate   [dc, dq]
///   weighted_sum  [alpha * dq + (1 - alpha) * dc]
///   interaction   [dc, dq, dc * dq, dc / (dq + epsilon)]
///   polynomial    dc^a * dq^b for 1 <= a + b <= degree, by total degree and
///                 then by descending power of dc
FeatureMatrix build_features(std::span<const DistancePair> pairs, const FeatureMethod& method,
                             const WeightingParams& params, std::vector<std::string> doc_ids = {});

/// Routes raw distances through apply_weighting (unless the method is
/// weighted_sum or the scope is `none`) and then build_features.
FeatureMatrix engineer_features(std::span<const DistancePair> raw_pairs, const FeatureMethod& method,
                                const WeightingParams& params, WeightingScope scope,
                                std::vector<std::string> doc_ids = {});

/// Zero mean, unit population variance per column; constant columns become 0.
std::pair<FeatureMatrix, StandardizationStats> standardize(const FeatureMatrix& features);

/// Inverse of standardize (x * std + mean).
Eigen::MatrixXd unstandardize(const Eigen::Ref<const Eigen::MatrixXd>& standardized,
                              const StandardizationStats& stats);

/// CSV: doc_id,f1..fF
void write_features_csv(const FeatureMatrix& features, const std::filesystem::path& path);

}  // namespace ragprune
