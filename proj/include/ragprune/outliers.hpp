#pragma once

#include "ragprune/common.hpp"
#include "ragprune/gmm.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace ragprune {

/// Linear-interpolation percentile over the sorted values:
/// h = (percentile / 100) * (N - 1), result = s[floor h] + frac(h) * (s[floor h + 1] - s[floor h]).
/// `percentile` must lie in [0, 100].
double percentile_threshold(const Eigen::Ref<const Eigen::VectorXd>& values, double percentile);

struct OutlierDecision {
  std::vector<std::string> doc_ids;  // aligned with log_likelihoods
  Eigen::VectorXd log_likelihoods;
  double threshold = 0;
  double percentile = 0;
  std::vector<std::string> outlier_ids;  // input order

  bool is_outlier(const std::string& id) const;
};

/// Flags every point whose log-likelihood is strictly below the percentile
/// threshold. Ties at the threshold stay inliers.
OutlierDecision detect_outliers(const Eigen::Ref<const Eigen::VectorXd>& log_likelihoods,
                                const std::vector<std::string>& doc_ids, double percentile);

struct ScatterRow {
  std::string doc_id;
  double pc1 = 0;
  double pc2 = 0;
  Index cluster = 0;
  bool is_outlier = false;
};

/// Rows for a two-coordinate cluster/outlier plot. `reduced` must have two
/// columns and match the model dimension.
std::vector<ScatterRow> scatter_rows(const Eigen::Ref<const Eigen::MatrixXd>& reduced,
                                     const GmmModeld& model, const OutlierDecision& decision);

/// CSV: doc_id,pc1,pc2,cluster,is_outlier
void write_scatter_csv(const std::vector<ScatterRow>& rows, const std::filesystem::path& path);

void emit_scatter_data(const Eigen::Ref<const Eigen::MatrixXd>& reduced, const GmmModeld& model,
                       const OutlierDecision& decision, const std::filesystem::path& path);

}  // namespace ragprune
