#include "demo.hpp"

#include "ragprune/csv.hpp"
#include "ragprune/embedder.hpp"

#include <json.hpp>

#include <random>
#include <string>
#include <vector>

namespace ragprune::cli {

namespace {

using json = nlohmann::json;

constexpr Index kDim = 16;
const std::string kQuery = "How does retrieval-augmented generation pick its context?";

struct Triple {
  const char* id;
  const char* truth;
  const char* filtered;
  const char* original;
};

const Triple kTriples[] = {
    {"q1", "Retrieved documents are added to the prompt as context.",
     "The retrieved documents are added to the prompt as context.", "Documents about cooking are added to the prompt."},
    {"q2", "Outlier documents are removed before generation.", "Outlier documents are removed before the answer.",
     "All documents are kept before generation."},
    {"q3", "The centroid is the mean of the retrieved vectors.", "The centroid is the mean vector.",
     "The centroid is a random document."},
    {"q4", "Cosine similarity ranks the documents.", "Documents are ranked by cosine similarity.",
     "Cosine similarity ranks the documents."},
    {"q5", "A Gaussian mixture scores each document.", "Each document gets a Gaussian mixture score.",
     "A mixture of topics is used."},
};

// Deterministic stand-in for a text encoder: byte histogram plus an offset.
Eigen::VectorXd text_vector(const std::string& text) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(kDim, 0.5);
  for (const unsigned char c : text) v(c % kDim) += 1.0;
  return v;
}

}  // namespace

void write_demo_data(const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const auto gaussian = [&] {
    Eigen::VectorXd v(kDim);
    for (Index i = 0; i < kDim; ++i) v(i) = z(rng);
    return v;
  };

  const Eigen::VectorXd center = 5.0 * gaussian();
  std::vector<std::pair<std::string, Eigen::VectorXd>> docs;
  double radius = 0;
  for (int i = 0; i < 17; ++i) {
    const Eigen::VectorXd offset = gaussian();
    radius += offset.norm() / 17.0;
    docs.emplace_back("doc" + std::to_string(i), center + offset);
  }
  for (int i = 0; i < 3; ++i) {
    docs.emplace_back("off" + std::to_string(i), center + 10.0 * radius * gaussian().normalized());
  }

  std::string corpus;
  for (const auto& [id, v] : docs) {
    const std::string text = id.rfind("off", 0) == 0 ? "Unrelated note " + id + " about gardening."
                                                     : "Passage " + id + " on retrieval and context selection.";
    corpus += json{{"id", id}, {"text", text}, {"vector", std::vector<double>(v.data(), v.data() + v.size())}}.dump() +
              "\n";
  }
  csv::write_file(dir / "corpus.jsonl", corpus);

  std::filesystem::remove(dir / "cache.jsonl");
  {
    EmbeddingCache cache(dir / "cache.jsonl");
    cache.insert(kQuery, center + 0.3 * gaussian());
    for (const auto& t : kTriples) {
      for (const std::string text : {t.truth, t.filtered, t.original}) {
        if (!cache.lookup(text)) cache.insert(text, text_vector(text));
      }
    }
  }

  std::string triples;
  for (const auto& t : kTriples) {
    triples += json{{"question_id", t.id},
                    {"ground_truth", t.truth},
                    {"filtered_response", t.filtered},
                    {"original_response", t.original}}
                   .dump() +
               "\n";
  }
  csv::write_file(dir / "triples.jsonl", triples);

  const json config = {{"corpus", (dir / "corpus.jsonl").string()},
                       {"query", kQuery},
                       {"embedding_cache", (dir / "cache.jsonl").string()},
                       {"triples", (dir / "triples.jsonl").string()},
                       {"experiment_id", "demo"}};
  csv::write_file(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace ragprune::cli
