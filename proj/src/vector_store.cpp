#include "ragprune/vector_store.hpp"

#include "ragprune/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace ragprune {

using json = nlohmann::json;

Corpus::Corpus(std::vector<EmbeddingRecord> records) : records_(std::move(records)) {
  if (records_.empty()) throw DataError("empty corpus");
  dimension_ = records_.front().vector.size();
  if (dimension_ < 1) throw DataError("record '" + records_.front().id + "' has an empty vector");

  std::unordered_set<std::string> seen;
  for (const auto& record : records_) {
    if (record.vector.size() != dimension_) {
      throw DataError("record '" + record.id + "' has dimension " + std::to_string(record.vector.size()) +
                      ", expected " + std::to_string(dimension_));
    }
    if (!record.vector.allFinite()) throw DataError("record '" + record.id + "' has a non-finite value");
    if (!seen.insert(record.id).second) throw DataError("duplicate id '" + record.id + "'");
  }
}

namespace {

EmbeddingRecord parse_record(const std::string& line, std::size_t line_number) {
  const auto where = "line " + std::to_string(line_number) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw DataError(where + "expected a JSON object");
  for (const char* key : {"id", "text", "vector"}) {
    if (!j.contains(key)) throw DataError(where + "missing key \"" + key + "\"");
  }
  if (!j["id"].is_string() || !j["text"].is_string()) {
    throw DataError(where + "\"id\" and \"text\" must be strings");
  }
  const auto& values = j["vector"];
  if (!values.is_array() || values.empty()) throw DataError(where + "\"vector\" must be a non-empty array");

  EmbeddingRecord record{j["id"].get<std::string>(), j["text"].get<std::string>(),
                         Eigen::VectorXd(static_cast<Index>(values.size()))};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw DataError(where + "vector entry " + std::to_string(i) + " is not a number");
    const double v = values[i].get<double>();
    if (!std::isfinite(v)) throw DataError(where + "non-finite value in vector");
    record.vector(static_cast<Index>(i)) = v;
  }
  return record;
}

}  // namespace

Corpus ingest_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());

  std::vector<EmbeddingRecord> records;
  std::unordered_set<std::string> ids;
  Index dimension = 0;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto record = parse_record(line, line_number);
    const auto where = "line " + std::to_string(line_number) + ": ";
    if (records.empty()) {
      dimension = record.vector.size();
    } else if (record.vector.size() != dimension) {
      throw DataError(where + "dimension " + std::to_string(record.vector.size()) + " differs from " +
                      std::to_string(dimension));
    }
    if (!ids.insert(record.id).second) throw DataError(where + "duplicate id '" + record.id + "'");
    records.push_back(std::move(record));
  }
  if (records.empty()) throw DataError("empty corpus: " + path.string());
  return Corpus(std::move(records));
}

std::vector<std::string> RetrievedSet::ids() const {
  std::vector<std::string> out;
  out.reserve(hits.size());
  for (const auto& hit : hits) out.push_back(hit.record.id);
  return out;
}

std::vector<std::string> RetrievedSet::texts() const {
  std::vector<std::string> out;
  out.reserve(hits.size());
  for (const auto& hit : hits) out.push_back(hit.record.text);
  return out;
}

Eigen::MatrixXd RetrievedSet::vectors() const {
  if (hits.empty()) return {};
  Eigen::MatrixXd out(size(), hits.front().record.vector.size());
  for (Index i = 0; i < size(); ++i) out.row(i) = hits[static_cast<std::size_t>(i)].record.vector.transpose();
  return out;
}

RetrievedSet top_k(const Corpus& corpus, const Eigen::VectorXd& query, Index k) {
  if (k < 1) throw ConfigError("top_k: k must be >= 1");
  if (query.size() != corpus.dimension()) {
    throw DataError("top_k: query dimension " + std::to_string(query.size()) + " != corpus dimension " +
                    std::to_string(corpus.dimension()));
  }
  if (!query.allFinite()) throw DataError("top_k: query has non-finite values");
  const double query_norm = query.norm();
  if (query_norm == 0.0) throw DataError("top_k: zero-norm query vector");

  const auto& records = corpus.records();
  std::vector<double> scores(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double norm = records[i].vector.norm();
    scores[i] = norm == 0.0 ? 0.0 : records[i].vector.dot(query) / (norm * query_norm);
  }

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return records[a].id < records[b].id;
                    });

  RetrievedSet result;
  result.query = query;
  result.hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    result.hits.push_back({records[order[r]], scores[order[r]], static_cast<Index>(r + 1)});
  }
  return result;
}

Centroid centroid_of(const RetrievedSet& hits) {
  if (hits.hits.empty()) throw DataError("centroid_of: empty retrieved set");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(hits.hits.front().record.vector.size());
  for (const auto& hit : hits.hits) {
    if (hit.record.vector.size() != sum.size()) throw DataError("centroid_of: dimension mismatch");
    sum += hit.record.vector;
  }
  return {sum / static_cast<double>(hits.hits.size())};
}

void write_retrieved_csv(const RetrievedSet& hits, const std::filesystem::path& path) {
  std::string out = "id,rank,score\n";
  for (const auto& hit : hits.hits) {
    out += csv::row({csv::field(hit.record.id), std::to_string(hit.rank), csv::number(hit.score)});
  }
  csv::write_file(path, out);
}

}  // namespace ragprune
