#pragma once

#include "ragprune/common.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace ragprune {

struct EmbeddingRecord {
  std::string id;
  std::string text;
  Eigen::VectorXd vector;
};

/// Immutable, validated collection of records sharing one dimension.
class Corpus {
public:
  /// Throws DataError on an empty list, a dimension mismatch, a duplicate id
  /// or a non-finite coordinate.
  explicit Corpus(std::vector<EmbeddingRecord> records);

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  Index dimension() const { return dimension_; }
  Index size() const { return static_cast<Index>(records_.size()); }

private:
  std::vector<EmbeddingRecord> records_;
  Index dimension_ = 0;
};

/// One JSON object per line: {"id": ..., "text": ..., "vector": [...]}.
/// Blank lines are ignored; errors cite the 1-based line number.
Corpus ingest_jsonl(const std::filesystem::path& path);

struct RetrievalHit {
  EmbeddingRecord record;
  double score = 0;  // cosine similarity to the query
  Index rank = 0;    // 1-based
};

struct RetrievedSet {
  Eigen::VectorXd query;
  std::vector<RetrievalHit> hits;  // descending score

  Index size() const { return static_cast<Index>(hits.size()); }
  std::vector<std::string> ids() const;
  std::vector<std::string> texts() const;
  /// Hit vectors stacked as rows (N x D).
  Eigen::MatrixXd vectors() const;
};

struct Centroid {
  Eigen::VectorXd vector;
};

/// Exact cosine top-k. Ties break by ascending id; k larger than the corpus
/// returns every record. Records with a zero vector score 0.
RetrievedSet top_k(const Corpus& corpus, const Eigen::VectorXd& query, Index k);

/// Componentwise mean of the retrieved vectors.
Centroid centroid_of(const RetrievedSet& hits);

/// CSV: id,rank,score
void write_retrieved_csv(const RetrievedSet& hits, const std::filesystem::path& path);

}  // namespace ragprune
