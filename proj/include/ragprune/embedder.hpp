#pragma once

#include "ragprune/common.hpp"

#include <Eigen/Core>

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ragprune {

/// Source of text embeddings.
class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  /// One vector per text, in input order.
  virtual std::vector<Eigen::VectorXd> embed(const std::vector<std::string>& texts) = 0;
};

/// Lowercase hex SHA-256 of the UTF-8 bytes.
std::string content_hash(std::string_view text);

/// Vectors keyed by content hash, optionally backed by a JSONL file:
/// {"hash": "<hex>", "text_preview": "<first 40 chars>", "vector": [...]}.
/// Inserts are appended to the file immediately.
class EmbeddingCache {
public:
  EmbeddingCache() = default;
  /// Loads `path` if it exists (or fails when `must_exist`); later inserts
  /// append to it.
  explicit EmbeddingCache(std::filesystem::path path, bool must_exist = false);
  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  std::optional<Eigen::VectorXd> lookup(std::string_view text) const;
  std::optional<Eigen::VectorXd> lookup_hash(const std::string& hash) const;
  void insert(std::string_view text, const Eigen::VectorXd& vector);

  std::size_t size() const;
  /// 0 while empty.
  Index dimension() const;
  const std::filesystem::path& path() const { return path_; }

private:
  void read_file();

  std::filesystem::path path_;
  std::unordered_map<std::string, Eigen::VectorXd> entries_;
  Index dimension_ = 0;
  mutable std::shared_mutex mutex_;
};

struct EmbedderEndpoint {
  std::string base_url;
  double timeout_seconds = 30.0;
  std::optional<Index> expected_dim;
};

/// Client for POST {base_url}/embed with {"texts": [...]} answering
/// {"embeddings": [[...], ...]}. Cached texts are never sent.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
  explicit HttpEmbeddingProvider(EmbedderEndpoint endpoint,
                                 std::shared_ptr<EmbeddingCache> cache = std::make_shared<EmbeddingCache>());

  std::vector<Eigen::VectorXd> embed(const std::vector<std::string>& texts) override;

  /// HTTP requests issued so far.
  std::size_t request_count() const { return requests_.load(); }

private:
  EmbedderEndpoint endpoint_;
  std::shared_ptr<EmbeddingCache> cache_;
  std::atomic<std::size_t> requests_{0};
};

/// One-shot form of HttpEmbeddingProvider::embed.
std::vector<Eigen::VectorXd> embed_texts(const EmbedderEndpoint& endpoint,
                                         const std::vector<std::string>& texts,
                                         std::shared_ptr<EmbeddingCache> cache = nullptr);

/// Answers only from a cache file; unknown text raises a "missing embedding"
/// EmbedderError naming its hash.
class OfflineEmbeddingProvider : public EmbeddingProvider {
public:
  explicit OfflineEmbeddingProvider(const std::filesystem::path& cache_path);

  std::vector<Eigen::VectorXd> embed(const std::vector<std::string>& texts) override;

private:
  EmbeddingCache cache_;
};

std::unique_ptr<EmbeddingProvider> offline_provider(const std::filesystem::path& cache_path);

}  // namespace ragprune
