#include "ragprune/outliers.hpp"

#include "ragprune/csv.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ragprune {

double percentile_threshold(const Eigen::Ref<const Eigen::VectorXd>& values, double percentile) {
  if (values.size() == 0) throw DataError("percentile_threshold: empty input");
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw ConfigError("percentile must lie in [0, 100]");
  }
  if (!values.allFinite()) throw DataError("percentile_threshold: non-finite values");

  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const double h = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(h));
  if (lower + 1 >= sorted.size()) return sorted.back();
  const double fraction = h - static_cast<double>(lower);
  return sorted[lower] + fraction * (sorted[lower + 1] - sorted[lower]);
}

bool OutlierDecision::is_outlier(const std::string& id) const {
  return std::find(outlier_ids.begin(), outlier_ids.end(), id) != outlier_ids.end();
}

OutlierDecision detect_outliers(const Eigen::Ref<const Eigen::VectorXd>& log_likelihoods,
                                const std::vector<std::string>& doc_ids, double percentile) {
  if (static_cast<Index>(doc_ids.size()) != log_likelihoods.size()) {
    throw DataError("detect_outliers: " + std::to_string(doc_ids.size()) + " ids for " +
                    std::to_string(log_likelihoods.size()) + " log-likelihoods");
  }
  OutlierDecision decision;
  decision.doc_ids = doc_ids;
  decision.log_likelihoods = log_likelihoods;
  decision.percentile = percentile;
  decision.threshold = percentile_threshold(log_likelihoods, percentile);
  for (Index i = 0; i < log_likelihoods.size(); ++i) {
    if (log_likelihoods(i) < decision.threshold) decision.outlier_ids.push_back(doc_ids[static_cast<std::size_t>(i)]);
  }
  return decision;
}

std::vector<ScatterRow> scatter_rows(const Eigen::Ref<const Eigen::MatrixXd>& reduced, const GmmModeld& model,
                                     const OutlierDecision& decision) {
  if (reduced.cols() != 2) {
    throw DataError("scatter: expected 2 columns, got " + std::to_string(reduced.cols()));
  }
  if (static_cast<Index>(decision.doc_ids.size()) != reduced.rows()) {
    throw DataError("scatter: decision covers " + std::to_string(decision.doc_ids.size()) + " points, data has " +
                    std::to_string(reduced.rows()));
  }
  const auto labels = gmm_predict(model, reduced);
  std::vector<ScatterRow> rows;
  rows.reserve(labels.size());
  for (Index i = 0; i < reduced.rows(); ++i) {
    const auto& id = decision.doc_ids[static_cast<std::size_t>(i)];
    rows.push_back({id, reduced(i, 0), reduced(i, 1), labels[static_cast<std::size_t>(i)], decision.is_outlier(id)});
  }
  return rows;
}

void write_scatter_csv(const std::vector<ScatterRow>& rows, const std::filesystem::path& path) {
  std::string out = "doc_id,pc1,pc2,cluster,is_outlier\n";
  for (const auto& row : rows) {
    out += csv::row({csv::field(row.doc_id), csv::number(row.pc1), csv::number(row.pc2),
                     std::to_string(row.cluster), row.is_outlier ? "true" : "false"});
  }
  csv::write_file(path, out);
}

void emit_scatter_data(const Eigen::Ref<const Eigen::MatrixXd>& reduced, const GmmModeld& model,
                       const OutlierDecision& decision, const std::filesystem::path& path) {
  write_scatter_csv(scatter_rows(reduced, model, decision), path);
}

}  // namespace ragprune
