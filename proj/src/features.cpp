#include "ragprune/features.hpp"

#include "ragprune/csv.hpp"

#include <cmath>
#include <string>

namespace ragprune {

Index FeatureMethod::feature_count() const {
  switch (kind) {
    case FeatureKind::concatenate: return 2;
    case FeatureKind::weighted_sum: return 1;
    case FeatureKind::interaction: return 4;
    case FeatureKind::polynomial: return Index(degree + 1) * (degree + 2) / 2 - 1;
  }
  return 0;
}

std::string FeatureMethod::name() const {
  switch (kind) {
    case FeatureKind::concatenate: return "concatenate";
    case FeatureKind::weighted_sum: return "weighted_sum";
    case FeatureKind::interaction: return "interaction";
    case FeatureKind::polynomial: return "polynomial";
  }
  return "unknown";
}

FeatureMethod parse_feature_method(std::string_view text, int default_degree) {
  std::string_view name = text;
  int degree = default_degree;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    name = text.substr(0, colon);
    const std::string digits(text.substr(colon + 1));
    try {
      std::size_t used = 0;
      degree = std::stoi(digits, &used);
      if (used != digits.size()) throw std::invalid_argument(digits);
    } catch (const std::exception&) {
      throw ConfigError("invalid polynomial degree in '" + std::string(text) + "'");
    }
    if (name != "polynomial") throw ConfigError("only polynomial takes a degree: '" + std::string(text) + "'");
  }
  if (name == "concatenate") return FeatureMethod::concatenate();
  if (name == "weighted_sum") return FeatureMethod::weighted_sum();
  if (name == "interaction") return FeatureMethod::interaction();
  if (name == "polynomial") {
    if (degree < 1) throw ConfigError("polynomial degree must be >= 1");
    return FeatureMethod::polynomial(degree);
  }
  throw ConfigError("unknown feature method '" + std::string(text) +
                    "' (expected concatenate, weighted_sum, interaction or polynomial)");
}

void WeightingParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

std::string to_string(WeightingScope scope) {
  return scope == WeightingScope::all_methods ? "all_methods" : "none";
}

WeightingScope parse_weighting_scope(std::string_view text) {
  if (text == "all_methods") return WeightingScope::all_methods;
  if (text == "none") return WeightingScope::none;
  throw ConfigError("weighting_applies_to must be all_methods or none, got '" + std::string(text) + "'");
}

std::vector<DistancePair> compute_distances(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                                            const Eigen::Ref<const Eigen::VectorXd>& centroid,
                                            const Eigen::Ref<const Eigen::VectorXd>& query) {
  if (vectors.cols() != centroid.size() || vectors.cols() != query.size()) {
    throw DataError("compute_distances: dimension mismatch");
  }
  std::vector<DistancePair> pairs(static_cast<std::size_t>(vectors.rows()));
  for (Index i = 0; i < vectors.rows(); ++i) {
    pairs[static_cast<std::size_t>(i)] = {(vectors.row(i) - centroid.transpose()).norm(),
                                          (vectors.row(i) - query.transpose()).norm()};
  }
  return pairs;
}

std::vector<DistancePair> compute_distances(const RetrievedSet& hits, const Centroid& centroid) {
  return compute_distances(hits.vectors(), centroid.vector, hits.query);
}

std::vector<DistancePair> apply_weighting(std::span<const DistancePair> pairs, const WeightingParams& params) {
  params.validate();
  std::vector<DistancePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.centroid * (1.0 - params.alpha), p.query * params.alpha});
  return out;
}

FeatureMatrix build_features(std::span<const DistancePair> pairs, const FeatureMethod& method,
                             const WeightingParams& params, std::vector<std::string> doc_ids) {
  params.validate();
  if (pairs.empty()) throw DataError("build_features: no distance pairs");
  if (!doc_ids.empty() && doc_ids.size() != pairs.size()) {
    throw DataError("build_features: " + std::to_string(doc_ids.size()) + " ids for " +
                    std::to_string(pairs.size()) + " rows");
  }
  if (method.kind == FeatureKind::polynomial && method.degree < 1) {
    throw ConfigError("polynomial degree must be >= 1");
  }

  const Index n = static_cast<Index>(pairs.size());
  FeatureMatrix features{Eigen::MatrixXd(n, method.feature_count()), method, std::move(doc_ids)};
  for (Index i = 0; i < n; ++i) {
    const double dc = pairs[static_cast<std::size_t>(i)].centroid;
    const double dq = pairs[static_cast<std::size_t>(i)].query;
    auto row = features.values.row(i);
    switch (method.kind) {
      case FeatureKind::concatenate:
        row << dc, dq;
        break;
      case FeatureKind::weighted_sum:
        row << params.alpha * dq + (1.0 - params.alpha) * dc;
        break;
      case FeatureKind::interaction:
        row << dc, dq, dc * dq, dc / (dq + params.epsilon);
        break;
      case FeatureKind::polynomial: {
        Index col = 0;
        for (int total = 1; total <= method.degree; ++total) {
          for (int a = total; a >= 0; --a) {
            row(col++) = std::pow(dc, a) * std::pow(dq, total - a);
          }
        }
        break;
      }
    }
  }
  if (!features.values.allFinite()) throw DataError("build_features: non-finite feature values");
  return features;
}

FeatureMatrix engineer_features(std::span<const DistancePair> raw_pairs, const FeatureMethod& method,
                                const WeightingParams& params, WeightingScope scope,
                                std::vector<std::string> doc_ids) {
  if (method.kind == FeatureKind::weighted_sum || scope == WeightingScope::none) {
    return build_features(raw_pairs, method, params, std::move(doc_ids));
  }
  const auto weighted = apply_weighting(raw_pairs, params);
  return build_features(weighted, method, params, std::move(doc_ids));
}

std::pair<FeatureMatrix, StandardizationStats> standardize(const FeatureMatrix& features) {
  const Index n = features.rows();
  if (n < 2) throw DataError("standardize: need at least 2 rows, got " + std::to_string(n));

  StandardizationStats stats;
  stats.mean = features.values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.values.rowwise() - stats.mean.transpose();
  stats.std = (centered.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt().transpose();

  FeatureMatrix out{Eigen::MatrixXd(n, features.cols()), features.method, features.doc_ids};
  for (Index j = 0; j < features.cols(); ++j) {
    if (stats.std(j) > 0.0) {
      out.values.col(j) = centered.col(j) / stats.std(j);
    } else {
      out.values.col(j).setZero();
      stats.constant_columns.push_back(j);
    }
  }
  return {std::move(out), std::move(stats)};
}

Eigen::MatrixXd unstandardize(const Eigen::Ref<const Eigen::MatrixXd>& standardized,
                              const StandardizationStats& stats) {
  return (standardized.array().rowwise() * stats.std.transpose().array()).rowwise() +
         stats.mean.transpose().array();
}

void write_features_csv(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::vector<std::string> header{"doc_id"};
  for (Index j = 0; j < features.cols(); ++j) header.push_back("f" + std::to_string(j + 1));
  std::string out = csv::row(header);
  for (Index i = 0; i < features.rows(); ++i) {
    std::vector<std::string> fields{
        features.doc_ids.empty() ? std::to_string(i) : csv::field(features.doc_ids[static_cast<std::size_t>(i)])};
    for (Index j = 0; j < features.cols(); ++j) fields.push_back(csv::number(features.values(i, j)));
    out += csv::row(fields);
  }
  csv::write_file(path, out);
}

}  // namespace ragprune
