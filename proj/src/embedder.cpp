#include "ragprune/embedder.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <mutex>

namespace ragprune {

using json = nlohmann::json;
using Kind = EmbedderError::Kind;

std::string content_hash(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("content_hash: SHA-256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0x0f];
  }
  return out;
}

namespace {

/// First `count` code points of a UTF-8 string.
std::string utf8_prefix(std::string_view text, std::size_t count) {
  std::size_t pos = 0;
  for (std::size_t seen = 0; pos < text.size() && seen < count; ++seen) {
    const auto lead = static_cast<unsigned char>(text[pos]);
    std::size_t width = 1;
    if (lead >= 0xf0) {
      width = 4;
    } else if (lead >= 0xe0) {
      width = 3;
    } else if (lead >= 0xc0) {
      width = 2;
    }
    pos = std::min(text.size(), pos + width);
  }
  return std::string(text.substr(0, pos));
}

Eigen::VectorXd parse_vector(const json& values) {
  if (!values.is_array() || values.empty()) throw std::invalid_argument("vector must be a non-empty array");
  Eigen::VectorXd v(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw std::invalid_argument("vector entry is not a number");
    v(static_cast<Index>(i)) = values[i].get<double>();
    if (!std::isfinite(v(static_cast<Index>(i)))) throw std::invalid_argument("vector entry is not finite");
  }
  return v;
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path path, bool must_exist) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    read_file();
  } else if (must_exist) {
    throw EmbedderError(Kind::cache, "embedding cache not found: " + path_.string());
  }
}

void EmbeddingCache::read_file() {
  std::ifstream in(path_);
  if (!in) throw EmbedderError(Kind::cache, "cannot open embedding cache " + path_.string());
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "corrupt embedding cache " + path_.string() + " line " + std::to_string(line_number) + ": ";
    try {
      const auto j = json::parse(line);
      if (!j.is_object() || !j.contains("hash") || !j["hash"].is_string() || !j.contains("vector")) {
        throw std::invalid_argument("expected {\"hash\", \"vector\"}");
      }
      auto vector = parse_vector(j["vector"]);
      if (dimension_ == 0) dimension_ = vector.size();
      if (vector.size() != dimension_) throw std::invalid_argument("dimension differs from earlier entries");
      entries_[j["hash"].get<std::string>()] = std::move(vector);
    } catch (const std::exception& e) {
      throw EmbedderError(Kind::cache, where + e.what());
    }
  }
}

std::optional<Eigen::VectorXd> EmbeddingCache::lookup(std::string_view text) const {
  return lookup_hash(content_hash(text));
}

std::optional<Eigen::VectorXd> EmbeddingCache::lookup_hash(const std::string& hash) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(std::string_view text, const Eigen::VectorXd& vector) {
  const auto hash = content_hash(text);
  std::unique_lock lock(mutex_);
  if (dimension_ != 0 && vector.size() != dimension_) {
    throw EmbedderError(Kind::dimension, "cache holds dimension " + std::to_string(dimension_) +
                                             ", refusing vector of dimension " + std::to_string(vector.size()));
  }
  if (entries_.contains(hash)) return;
  dimension_ = vector.size();
  entries_.emplace(hash, vector);
  if (path_.empty()) return;

  json line = {{"hash", hash}, {"text_preview", utf8_prefix(text, 40)}, {"vector", vector_json(vector)}};
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw EmbedderError(Kind::cache, "cannot append to embedding cache " + path_.string());
  out << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

Index EmbeddingCache::dimension() const {
  std::shared_lock lock(mutex_);
  return dimension_;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbedderEndpoint endpoint, std::shared_ptr<EmbeddingCache> cache)
    : endpoint_(std::move(endpoint)), cache_(cache ? std::move(cache) : std::make_shared<EmbeddingCache>()) {
  if (!(endpoint_.timeout_seconds > 0)) throw ConfigError("embedder timeout must be positive");
  if (endpoint_.base_url.rfind("http://", 0) != 0) {
    throw ConfigError("embedder URL must start with http://, got '" + endpoint_.base_url + "'");
  }
}

namespace {

void check_dimension(const Eigen::VectorXd& v, const std::optional<Index>& expected, std::size_t index) {
  if (expected && v.size() != *expected) {
    throw EmbedderError(Kind::dimension,
                        "embedding " + std::to_string(index) + " has dimension " + std::to_string(v.size()) +
                            ", expected " + std::to_string(*expected),
                        static_cast<Index>(index));
  }
}

}  // namespace

std::vector<Eigen::VectorXd> HttpEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ConfigError("embed: no texts");

  std::vector<Eigen::VectorXd> out(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_->lookup(texts[i])) {
      out[i] = std::move(*hit);
    } else {
      missing.push_back(i);
    }
  }

  if (!missing.empty()) {
    const auto scheme_end = endpoint_.base_url.find("://") + 3;
    const auto path_start = endpoint_.base_url.find('/', scheme_end);
    const std::string origin = endpoint_.base_url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : endpoint_.base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    json request = {{"texts", json::array()}};
    for (const auto i : missing) request["texts"].push_back(texts[i]);

    httplib::Client client(origin);
    const auto seconds = static_cast<time_t>(endpoint_.timeout_seconds);
    const auto micros = static_cast<time_t>((endpoint_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    ++requests_;
    const auto first = static_cast<Index>(missing.front());
    const auto response = client.Post(prefix + "/embed",
                                      request.dump(-1, ' ', false, json::error_handler_t::replace),
                                      "application/json");
    if (!response) {
      throw EmbedderError(Kind::network,
                          "embedder request to " + endpoint_.base_url + " failed: " + httplib::to_string(response.error()),
                          first);
    }
    if (response->status != 200) {
      throw EmbedderError(Kind::status, "embedder returned HTTP " + std::to_string(response->status), first);
    }

    json body;
    try {
      body = json::parse(response->body);
    } catch (const json::parse_error&) {
      throw EmbedderError(Kind::malformed, "embedder response is not JSON", first);
    }
    if (!body.is_object() || !body.contains("embeddings") || !body["embeddings"].is_array()) {
      throw EmbedderError(Kind::malformed, "embedder response lacks an \"embeddings\" array", first);
    }
    const auto& embeddings = body["embeddings"];
    if (embeddings.size() != missing.size()) {
      throw EmbedderError(Kind::malformed,
                          "embedder returned " + std::to_string(embeddings.size()) + " vectors for " +
                              std::to_string(missing.size()) + " texts",
                          first);
    }
    for (std::size_t j = 0; j < missing.size(); ++j) {
      const auto i = missing[j];
      try {
        out[i] = parse_vector(embeddings[j]);
      } catch (const std::invalid_argument& e) {
        throw EmbedderError(Kind::malformed, "embedding " + std::to_string(i) + ": " + e.what(), static_cast<Index>(i));
      }
      if (out[i].size() != out[missing.front()].size()) {
        throw EmbedderError(Kind::dimension, "embedding " + std::to_string(i) + " differs in dimension from embedding " +
                                                 std::to_string(missing.front()),
                            static_cast<Index>(i));
      }
      check_dimension(out[i], endpoint_.expected_dim, i);
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) check_dimension(out[i], endpoint_.expected_dim, i);
  for (const auto i : missing) cache_->insert(texts[i], out[i]);
  return out;
}

std::vector<Eigen::VectorXd> embed_texts(const EmbedderEndpoint& endpoint, const std::vector<std::string>& texts,
                                         std::shared_ptr<EmbeddingCache> cache) {
  HttpEmbeddingProvider provider(endpoint, std::move(cache));
  return provider.embed(texts);
}

OfflineEmbeddingProvider::OfflineEmbeddingProvider(const std::filesystem::path& cache_path)
    : cache_(cache_path, /*must_exist=*/true) {}

std::vector<Eigen::VectorXd> OfflineEmbeddingProvider::embed(const std::vector<std::string>& texts) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto hash = content_hash(texts[i]);
    auto hit = cache_.lookup_hash(hash);
    if (!hit) {
      throw EmbedderError(Kind::missing, "missing embedding for text " + std::to_string(i) + " (hash " + hash + ")",
                          static_cast<Index>(i));
    }
    out.push_back(std::move(*hit));
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> offline_provider(const std::filesystem::path& cache_path) {
  return std::make_unique<OfflineEmbeddingProvider>(cache_path);
}

}  // namespace ragprune
