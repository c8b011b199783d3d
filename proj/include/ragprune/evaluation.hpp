#pragma once

#include "ragprune/common.hpp"
#include "ragprune/embedder.hpp"
#include "ragprune/pipeline.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ragprune {

/// dot(a, b) / (|a| |b|). Throws DataError on zero norm or size mismatch.
double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a,
                         const Eigen::Ref<const Eigen::VectorXd>& b);

/// Lowercased runs of ASCII letters and digits. Bytes >= 0x80 count as word
/// characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// Smoothed TF-IDF: raw counts, idf = ln((1 + n) / (1 + df)) + 1, L2-normalized.
class TfidfModel {
public:
  explicit TfidfModel(const std::vector<std::string>& corpus);

  /// Sparse L2-normalized vector; empty when the text has no tokens.
  std::map<std::string, double> vectorize(std::string_view text) const;
  /// Dot product of the two normalized vectors, 0 when either is tokenless.
  double similarity(std::string_view a, std::string_view b) const;
  double idf(const std::string& token) const;

private:
  std::map<std::string, Index> document_frequency_;
  Index documents_ = 0;
};

double tfidf_similarity(std::string_view a, std::string_view b, const std::vector<std::string>& idf_corpus);

/// (sim_filtered - sim_original) / sim_original, or nullopt when
/// |sim_original| < 1e-9.
std::optional<double> improvement(double sim_filtered, double sim_original);

struct ResponseTriple {
  std::string question_id;
  std::string ground_truth;
  std::string filtered_response;
  std::string original_response;
  std::optional<Eigen::VectorXd> ground_truth_embedding;
  std::optional<Eigen::VectorXd> filtered_embedding;
  std::optional<Eigen::VectorXd> original_embedding;
  std::optional<double> docs_kept;
};

/// JSONL: {"question_id", "ground_truth", "filtered_response", "original_response"},
/// optionally "docs_kept".
std::vector<ResponseTriple> read_triples_jsonl(const std::filesystem::path& path);

struct QuestionResult {
  std::string question_id;
  std::optional<double> emb_improvement;    // nullopt = skipped
  std::optional<double> tfidf_improvement;
  double emb_filtered = 0;
  double emb_original = 0;
  double tfidf_filtered = 0;
  double tfidf_original = 0;

  bool skipped() const { return !emb_improvement || !tfidf_improvement; }
};

/// Running mean of the non-skipped values among the first j + 1 questions;
/// nullopt until the first non-skipped value.
using RunningSeries = std::vector<std::optional<double>>;

struct ImprovementReport {
  std::vector<QuestionResult> per_question;
  std::optional<double> average_emb;
  std::optional<double> average_tfidf;
  RunningSeries running_emb;
  RunningSeries running_tfidf;
  Index n_questions = 0;
  Index n_effective_emb = 0;
  Index n_effective_tfidf = 0;
  std::optional<double> avg_docs_kept;
  SweepConfig config_echo;
  std::vector<std::string> warnings;
};

/// Mean of the present values and the running series, computed with one
/// shared accumulation so the series ends exactly on the mean.
std::pair<std::optional<double>, RunningSeries> aggregate(const std::vector<std::optional<double>>& values);

/// Scores every triple against its ground truth with embedding cosine and
/// TF-IDF (idf fitted on all 3N responses) and averages the improvements.
ImprovementReport evaluate_batch(const std::vector<ResponseTriple>& triples, EmbeddingProvider& embedder,
                                 const SweepConfig& config_echo = {});

struct ExperimentLabel {
  std::string experiment_id = "exp";
  std::string question_category;
};

/// One summary row: experiment_id,method,alpha,min_freq,percentile,
/// question_category,n_questions,n_effective_emb,n_effective_tfidf,emb_pct,tfidf_pct,avg_docs_kept
void export_summary(const ImprovementReport& report, const ExperimentLabel& label,
                    const std::filesystem::path& path);
/// question_id,emb_improvement,tfidf_improvement,skipped
void export_per_question(const ImprovementReport& report, const std::filesystem::path& path);
/// n,avg_emb_improvement,avg_tfidf_improvement
void export_running_averages(const ImprovementReport& report, const std::filesystem::path& path);

/// Writes summary.csv, per_question.csv and running_avg.csv into `dir`.
void export_report(const ImprovementReport& report, const ExperimentLabel& label,
                   const std::filesystem::path& dir);

std::string summary_header();

}  // namespace ragprune
