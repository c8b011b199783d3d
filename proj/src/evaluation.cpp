#include "ragprune/evaluation.hpp"

#include "ragprune/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <tuple>

namespace ragprune {

using json = nlohmann::json;

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) {
    throw DataError("cosine_similarity: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cosine_similarity: zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) != 0 || c >= 0x80) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TfidfModel::TfidfModel(const std::vector<std::string>& corpus) : documents_(static_cast<Index>(corpus.size())) {
  for (const auto& document : corpus) {
    auto tokens = tokenize(document);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (const auto& token : tokens) ++document_frequency_[token];
  }
}

double TfidfModel::idf(const std::string& token) const {
  const auto it = document_frequency_.find(token);
  const double df = it == document_frequency_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + df)) + 1.0;
}

std::map<std::string, double> TfidfModel::vectorize(std::string_view text) const {
  std::map<std::string, double> weights;
  for (auto& token : tokenize(text)) weights[std::move(token)] += 1.0;
  double norm2 = 0.0;
  for (auto& [token, weight] : weights) {
    weight *= idf(token);
    norm2 += weight * weight;
  }
  if (norm2 > 0.0) {
    const double norm = std::sqrt(norm2);
    for (auto& entry : weights) entry.second /= norm;
  }
  return weights;
}

double TfidfModel::similarity(std::string_view a, std::string_view b) const {
  const auto va = vectorize(a);
  const auto vb = vectorize(b);
  double dot = 0.0;
  auto ia = va.begin();
  auto ib = vb.begin();
  while (ia != va.end() && ib != vb.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(dot, 0.0, 1.0);
}

double tfidf_similarity(std::string_view a, std::string_view b, const std::vector<std::string>& idf_corpus) {
  return TfidfModel(idf_corpus).similarity(a, b);
}

std::optional<double> improvement(double sim_filtered, double sim_original) {
  if (std::abs(sim_original) < 1e-9) return std::nullopt;
  return (sim_filtered - sim_original) / sim_original;
}

namespace {

std::optional<Eigen::VectorXd> optional_vector(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  const auto& values = j[key];
  if (!values.is_array() || values.empty()) throw DataError(where + "\"" + key + "\" must be a non-empty array");
  Eigen::VectorXd v(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw DataError(where + "\"" + key + "\" has a non-numeric entry");
    v(static_cast<Index>(i)) = values[i].get<double>();
  }
  return v;
}

}  // namespace

std::vector<ResponseTriple> read_triples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triples file " + path.string());
  std::vector<ResponseTriple> triples;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.filename().string() + " line " + std::to_string(line_number) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    ResponseTriple t;
    auto text = [&](const char* key) {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw DataError(where + "missing string \"" + key + "\"");
      }
      return j[key].get<std::string>();
    };
    t.question_id = text("question_id");
    t.ground_truth = text("ground_truth");
    t.filtered_response = text("filtered_response");
    t.original_response = text("original_response");
    t.ground_truth_embedding = optional_vector(j, "ground_truth_embedding", where);
    t.filtered_embedding = optional_vector(j, "filtered_embedding", where);
    t.original_embedding = optional_vector(j, "original_embedding", where);
    if (j.contains("docs_kept") && j["docs_kept"].is_number()) t.docs_kept = j["docs_kept"].get<double>();
    triples.push_back(std::move(t));
  }
  if (triples.empty()) throw DataError("no questions in " + path.string());
  return triples;
}

std::pair<std::optional<double>, RunningSeries> aggregate(const std::vector<std::optional<double>>& values) {
  RunningSeries running;
  running.reserve(values.size());
  double sum = 0.0;
  Index count = 0;
  std::optional<double> mean;
  for (const auto& value : values) {
    if (value) {
      sum += *value;
      ++count;
      mean = sum / static_cast<double>(count);
    }
    running.push_back(mean);
  }
  return {mean, std::move(running)};
}

namespace {

std::array<Eigen::VectorXd, 3> embed_triple(const ResponseTriple& t, EmbeddingProvider& embedder) {
  const std::array<const std::optional<Eigen::VectorXd>*, 3> given{&t.ground_truth_embedding, &t.filtered_embedding,
                                                                    &t.original_embedding};
  const std::array<const std::string*, 3> texts{&t.ground_truth, &t.filtered_response, &t.original_response};
  std::vector<std::string> request;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!given[i]->has_value()) request.push_back(*texts[i]);
  }
  std::vector<Eigen::VectorXd> fetched;
  if (!request.empty()) {
    try {
      fetched = embedder.embed(request);
    } catch (const EmbedderError& e) {
      throw EmbedderError(e.kind(), "question '" + t.question_id + "': " + e.what(), e.index());
    }
    if (fetched.size() != request.size()) {
      throw EmbedderError(EmbedderError::Kind::malformed,
                          "question '" + t.question_id + "': embedder returned the wrong number of vectors");
    }
  }
  std::array<Eigen::VectorXd, 3> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < 3; ++i) out[i] = given[i]->has_value() ? **given[i] : fetched[next++];
  return out;
}

}  // namespace

ImprovementReport evaluate_batch(const std::vector<ResponseTriple>& triples, EmbeddingProvider& embedder,
                                 const SweepConfig& config_echo) {
  if (triples.empty()) throw DataError("no questions");

  std::vector<std::string> corpus;
  corpus.reserve(3 * triples.size());
  for (const auto& t : triples) {
    if (t.ground_truth.empty() || t.filtered_response.empty() || t.original_response.empty()) {
      throw DataError("question '" + t.question_id + "' has an empty response text");
    }
    corpus.push_back(t.ground_truth);
    corpus.push_back(t.filtered_response);
    corpus.push_back(t.original_response);
  }
  const TfidfModel tfidf(corpus);

  ImprovementReport report;
  report.config_echo = config_echo;
  report.n_questions = static_cast<Index>(triples.size());
  std::vector<std::optional<double>> emb_values;
  std::vector<std::optional<double>> tfidf_values;
  double docs_kept_sum = 0.0;
  Index docs_kept_count = 0;

  for (const auto& t : triples) {
    const auto [truth, filtered, original] = embed_triple(t, embedder);
    QuestionResult q;
    q.question_id = t.question_id;
    try {
      q.emb_filtered = cosine_similarity(filtered, truth);
      q.emb_original = cosine_similarity(original, truth);
    } catch (const DataError& e) {
      throw DataError("question '" + t.question_id + "': " + e.what());
    }
    q.tfidf_filtered = tfidf.similarity(t.filtered_response, t.ground_truth);
    q.tfidf_original = tfidf.similarity(t.original_response, t.ground_truth);
    if (tokenize(t.ground_truth).empty()) {
      report.warnings.push_back("question '" + t.question_id + "': ground truth has no tokens, TF-IDF similarity is 0");
    }
    q.emb_improvement = improvement(q.emb_filtered, q.emb_original);
    q.tfidf_improvement = improvement(q.tfidf_filtered, q.tfidf_original);
    if (q.skipped()) {
      report.warnings.push_back("question '" + t.question_id + "': original similarity is zero, skipped");
    }
    emb_values.push_back(q.emb_improvement);
    tfidf_values.push_back(q.tfidf_improvement);
    if (t.docs_kept) {
      docs_kept_sum += *t.docs_kept;
      ++docs_kept_count;
    }
    report.per_question.push_back(std::move(q));
  }

  std::tie(report.average_emb, report.running_emb) = aggregate(emb_values);
  std::tie(report.average_tfidf, report.running_tfidf) = aggregate(tfidf_values);
  for (const auto& q : report.per_question) {
    report.n_effective_emb += q.emb_improvement ? 1 : 0;
    report.n_effective_tfidf += q.tfidf_improvement ? 1 : 0;
  }
  if (docs_kept_count > 0) report.avg_docs_kept = docs_kept_sum / static_cast<double>(docs_kept_count);
  return report;
}

std::string summary_header() {
  return "experiment_id,method,alpha,min_freq,percentile,question_category,n_questions,"
         "n_effective_emb,n_effective_tfidf,emb_pct,tfidf_pct,avg_docs_kept\n";
}

namespace {

std::optional<double> percent(const std::optional<double>& value) {
  if (!value) return std::nullopt;
  return 100.0 * *value;
}

std::string method_label(const FeatureMethod& method) {
  if (method.kind == FeatureKind::polynomial) return method.name() + ":" + std::to_string(method.degree);
  return method.name();
}

}  // namespace

void export_summary(const ImprovementReport& report, const ExperimentLabel& label, const std::filesystem::path& path) {
  const auto& config = report.config_echo;
  std::string out = summary_header();
  out += csv::row({csv::field(label.experiment_id), method_label(config.method), csv::number(config.weighting.alpha),
                   std::to_string(config.min_outlier_freq), csv::number(config.percentile),
                   csv::field(label.question_category), std::to_string(report.n_questions),
                   std::to_string(report.n_effective_emb), std::to_string(report.n_effective_tfidf),
                   csv::number(percent(report.average_emb)), csv::number(percent(report.average_tfidf)),
                   csv::number(report.avg_docs_kept)});
  csv::write_file(path, out);
}

void export_per_question(const ImprovementReport& report, const std::filesystem::path& path) {
  std::string out =
      "question_id,emb_improvement,tfidf_improvement,skipped,emb_sim_filtered,emb_sim_original,"
      "tfidf_sim_filtered,tfidf_sim_original\n";
  for (const auto& q : report.per_question) {
    out += csv::row({csv::field(q.question_id), csv::number(q.emb_improvement), csv::number(q.tfidf_improvement),
                     q.skipped() ? "true" : "false", csv::number(q.emb_filtered), csv::number(q.emb_original),
                     csv::number(q.tfidf_filtered), csv::number(q.tfidf_original)});
  }
  csv::write_file(path, out);
}

void export_running_averages(const ImprovementReport& report, const std::filesystem::path& path) {
  std::string out = "n,avg_emb_improvement,avg_tfidf_improvement\n";
  for (std::size_t j = 0; j < report.running_emb.size(); ++j) {
    out += csv::row({std::to_string(j + 1), csv::number(report.running_emb[j]), csv::number(report.running_tfidf[j])});
  }
  csv::write_file(path, out);
}

void export_report(const ImprovementReport& report, const ExperimentLabel& label, const std::filesystem::path& dir) {
  export_summary(report, label, dir / "summary.csv");
  export_per_question(report, dir / "per_question.csv");
  export_running_averages(report, dir / "running_avg.csv");
}

}  // namespace ragprune
