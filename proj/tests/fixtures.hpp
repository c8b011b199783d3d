#pragma once

#include "oracles.hpp"

#include "ragprune/vector_store.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// Points from a two-component 2-D mixture with identity covariances.
inline Eigen::MatrixXd two_gaussians(std::uint64_t seed, Eigen::Index n, const Eigen::Vector2d& a,
                                     const Eigen::Vector2d& b, double weight_a = 0.5) {
  oracle::Normal normal(seed);
  Eigen::MatrixXd out(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d& mean = normal.uniform() < weight_a ? a : b;
    out(i, 0) = mean(0) + normal();
    out(i, 1) = mean(1) + normal();
  }
  return out;
}

struct PlantedSet {
  ragprune::RetrievedSet hits;
  std::vector<std::string> planted_ids;
};

/// `inliers` Gaussian points around a center plus `planted` points at
/// `factor` times the inlier radius (mean inlier distance from the center)
/// in random directions. The query sits near the center.
inline PlantedSet planted_outliers(std::uint64_t seed, int inliers = 50, int planted = 5, double factor = 10.0,
                                   Eigen::Index dim = 16) {
  oracle::Normal normal(seed);
  const Eigen::VectorXd center = 5.0 * normal.vector(dim);
  std::vector<Eigen::VectorXd> offsets;
  double radius = 0.0;
  for (int i = 0; i < inliers; ++i) {
    offsets.push_back(normal.vector(dim));
    radius += offsets.back().norm();
  }
  radius /= inliers;

  std::vector<ragprune::EmbeddingRecord> records;
  for (int i = 0; i < inliers; ++i) {
    records.push_back({"in" + std::to_string(i), "inlier " + std::to_string(i), center + offsets[i]});
  }
  PlantedSet out;
  for (int i = 0; i < planted; ++i) {
    const Eigen::VectorXd direction = normal.vector(dim).normalized();
    const std::string id = "out" + std::to_string(i);
    records.push_back({id, "planted " + std::to_string(i), center + factor * radius * direction});
    out.planted_ids.push_back(id);
  }
  const Eigen::VectorXd query = center + 0.3 * normal.vector(dim);
  const ragprune::Corpus corpus(std::move(records));
  out.hits = ragprune::top_k(corpus, query, corpus.size());
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ragprune_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace fixtures
