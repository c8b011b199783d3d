#include "fixtures.hpp"

#include "ragprune/embedder.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <fstream>
#include <thread>

using namespace ragprune;
using json = nlohmann::json;

namespace {

// Local embedding server. Each text maps to [len, first byte, 1, ...] padded
// to `dim`; the prefix can be used to check path handling.
class StubServer {
public:
  explicit StubServer(int dim, std::string prefix = "") : dim_(dim) {
    server_.Post(prefix + "/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      if (status != 200) {
        res.status = status;
        return;
      }
      if (malformed) {
        res.set_content("not json", "text/plain");
        return;
      }
      const auto body = json::parse(req.body);
      json out = {{"embeddings", json::array()}};
      for (const auto& t : body["texts"]) {
        const auto text = t.get<std::string>();
        json v = json::array();
        v.push_back(static_cast<double>(text.size()));
        v.push_back(text.empty() ? 0.0 : static_cast<double>(static_cast<unsigned char>(text[0])));
        for (int i = 2; i < dim_; ++i) v.push_back(1.0 / (i + 1));
        out["embeddings"].push_back(v);
        last_batch.push_back(text);
      }
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> hits{0};
  int status = 200;
  bool malformed = false;
  std::vector<std::string> last_batch;

private:
  int dim_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("content_hash is SHA-256 hex") {
  CHECK(content_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(content_hash("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("embed_texts: vectors in order with the stub server") {
  StubServer server(4);
  const auto v = embed_texts({server.url()}, {"hello", "a"});
  REQUIRE(v.size() == 2);
  CHECK(v[0].size() == 4);
  CHECK(v[0](0) == 5.0);
  CHECK(v[1](0) == 1.0);
  CHECK(v[1](1) == 'a');
  CHECK(server.hits == 1);
}

TEST_CASE("embed_texts: base URL may carry a path prefix") {
  StubServer server(3, "/v1/models/x");
  const auto v = embed_texts({server.url() + "/v1/models/x/"}, {"abc"});
  CHECK(v[0](0) == 3.0);
}

TEST_CASE("embed_texts: dimension check names the index") {
  StubServer server(512);
  EmbedderEndpoint endpoint{server.url(), 30.0, 768};
  try {
    embed_texts(endpoint, {"one", "two"});
    FAIL("expected a dimension error");
  } catch (const EmbedderError& e) {
    CHECK(e.kind() == EmbedderError::Kind::dimension);
    CHECK(e.index() == 0);
    CHECK(std::string(e.what()).find("512") != std::string::npos);
    CHECK(std::string(e.what()).find("768") != std::string::npos);
  }
}

TEST_CASE("embed_texts: transport failures are distinct") {
  SUBCASE("status") {
    StubServer server(4);
    server.status = 503;
    try {
      embed_texts({server.url()}, {"x"});
      FAIL("expected an error");
    } catch (const EmbedderError& e) {
      CHECK(e.kind() == EmbedderError::Kind::status);
      CHECK(std::string(e.what()).find("503") != std::string::npos);
    }
  }
  SUBCASE("malformed") {
    StubServer server(4);
    server.malformed = true;
    try {
      embed_texts({server.url()}, {"x"});
      FAIL("expected an error");
    } catch (const EmbedderError& e) {
      CHECK(e.kind() == EmbedderError::Kind::malformed);
    }
  }
  SUBCASE("network") {
    int port = 0;
    {
      httplib::Server probe;
      port = probe.bind_to_any_port("127.0.0.1");
    }
    try {
      embed_texts({"http://127.0.0.1:" + std::to_string(port), 2.0}, {"x"});
      FAIL("expected an error");
    } catch (const EmbedderError& e) {
      CHECK(e.kind() == EmbedderError::Kind::network);
      CHECK(e.index() == 0);
    }
  }
  SUBCASE("configuration") {
    CHECK_THROWS_AS(embed_texts({"https://example.com"}, {"x"}), ConfigError);
    CHECK_THROWS_AS(embed_texts({"http://127.0.0.1:1", 0.0}, {"x"}), ConfigError);
    CHECK_THROWS_AS(embed_texts({"http://127.0.0.1:1"}, {}), ConfigError);
  }
}

TEST_CASE("HttpEmbeddingProvider: repeated texts come from the cache") {
  StubServer server(4);
  fixtures::TempDir dir("http_cache");
  auto cache = std::make_shared<EmbeddingCache>(dir / "cache.jsonl");
  HttpEmbeddingProvider provider({server.url()}, cache);
  const auto first = provider.embed({"alpha", "beta"});
  CHECK(server.hits == 1);
  const auto second = provider.embed({"beta", "alpha"});
  CHECK(server.hits == 1);
  CHECK(provider.request_count() == 1);
  CHECK(second[0] == first[1]);
  CHECK(second[1] == first[0]);

  server.last_batch.clear();
  const auto mixed = provider.embed({"alpha", "gamma"});
  CHECK(server.hits == 2);
  CHECK(server.last_batch == std::vector<std::string>{"gamma"});
  CHECK(mixed[0] == first[0]);

  // The cache file alone answers later runs.
  const auto offline = offline_provider(dir / "cache.jsonl");
  CHECK(offline->embed({"gamma", "alpha"})[1] == first[0]);
}

TEST_CASE("EmbeddingCache: bitwise round trip") {
  fixtures::TempDir dir("cache");
  oracle::Normal normal(3);
  std::vector<std::pair<std::string, Eigen::VectorXd>> entries;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd v = normal.vector(6);
    v(0) = 0.1 + i;                        // not exactly representable
    v(1) = 1.0 / 3.0;
    v(2) = std::numeric_limits<double>::denorm_min();
    v(3) = -std::numeric_limits<double>::max();
    entries.emplace_back("text number " + std::to_string(i) + " caf\xc3\xa9", v);
  }
  {
    EmbeddingCache cache(dir / "c.jsonl");
    for (const auto& [text, v] : entries) cache.insert(text, v);
    CHECK(cache.size() == 3);
    CHECK(cache.dimension() == 6);
  }
  OfflineEmbeddingProvider provider(dir / "c.jsonl");
  const auto got = provider.embed({entries[0].first, entries[1].first, entries[2].first});
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(got[i].size() == 6);
    for (Eigen::Index j = 0; j < 6; ++j) {
      CHECK(std::memcmp(&got[i](j), &entries[i].second(j), sizeof(double)) == 0);
    }
  }

  std::ifstream in(dir / "c.jsonl");
  std::string line;
  std::getline(in, line);
  const auto j = json::parse(line);
  CHECK(j["hash"] == content_hash(entries[0].first));
  CHECK(j["text_preview"] == entries[0].first);
  CHECK(j["vector"].size() == 6);
}

TEST_CASE("EmbeddingCache: preview is cut at 40 characters") {
  fixtures::TempDir dir("preview");
  std::string text;
  for (int i = 0; i < 50; ++i) text += "\xc3\xa9";  // 50 two-byte characters
  {
    EmbeddingCache cache(dir / "c.jsonl");
    cache.insert(text, Eigen::Vector2d(1, 2));
  }
  std::ifstream in(dir / "c.jsonl");
  std::string line;
  std::getline(in, line);
  const auto preview = json::parse(line)["text_preview"].get<std::string>();
  CHECK(preview == text.substr(0, 80));
}

TEST_CASE("EmbeddingCache: errors") {
  fixtures::TempDir dir("cache_err");
  CHECK_THROWS_AS(OfflineEmbeddingProvider(dir / "absent.jsonl"), EmbedderError);
  {
    std::ofstream(dir / "corrupt.jsonl") << "{\"hash\":\"ab\",\"vector\":[1,2]}\nnot json\n";
  }
  try {
    OfflineEmbeddingProvider provider(dir / "corrupt.jsonl");
    FAIL("expected an error");
  } catch (const EmbedderError& e) {
    CHECK(e.kind() == EmbedderError::Kind::cache);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  EmbeddingCache memory;
  memory.insert("a", Eigen::Vector2d(1, 2));
  CHECK_THROWS_AS(memory.insert("b", Eigen::Vector3d(1, 2, 3)), EmbedderError);
  CHECK(memory.lookup("a").has_value());
  CHECK(memory.lookup_hash(content_hash("a")).has_value());
  CHECK_FALSE(memory.lookup("b").has_value());
}

TEST_CASE("offline provider: unknown text names its hash") {
  fixtures::TempDir dir("offline");
  {
    EmbeddingCache cache(dir / "c.jsonl");
    cache.insert("known", Eigen::Vector2d(1, 2));
  }
  const auto provider = offline_provider(dir / "c.jsonl");
  CHECK(provider->embed({"known"})[0] == Eigen::Vector2d(1, 2));
  try {
    provider->embed({"known", "unknown"});
    FAIL("expected an error");
  } catch (const EmbedderError& e) {
    CHECK(e.kind() == EmbedderError::Kind::missing);
    CHECK(e.index() == 1);
    const std::string what = e.what();
    CHECK(what.find("missing embedding") != std::string::npos);
    CHECK(what.find(content_hash("unknown")) != std::string::npos);
  }
}

TEST_CASE("providers are safe under concurrent use") {
  StubServer server(4);
  fixtures::TempDir dir("concurrent");
  auto cache = std::make_shared<EmbeddingCache>(dir / "c.jsonl");
  HttpEmbeddingProvider provider({server.url()}, cache);
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 10; ++i) {
        const std::string text = "text " + std::to_string((t * 10 + i) % 15);
        const auto v = provider.embed({text});
        if (v[0](0) != static_cast<double>(text.size())) ++failures;
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(failures == 0);
  CHECK(cache->size() == 15);
}
