#pragma once

#include "ragprune/pipeline.hpp"
#include "ragprune/serialization.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ragprune::cli {

/// Everything a run needs. Every field except out_dir is echoed to
/// config_echo.json, which --config accepts back.
struct RunConfig {
  std::string corpus;
  std::string query;            // text; embedded through the embedding source
  std::string query_embedding;  // JSON array file, used instead of embedding `query`
  std::string question;         // prompt question; defaults to `query`
  std::string embedder_url;
  std::string embedder_cache;   // write-through cache for embedder_url
  std::string embedding_cache;  // offline provider
  double timeout = 30.0;
  std::optional<Index> expected_dim;
  std::string triples;
  std::string experiment_id = "exp";
  std::string category;
  std::vector<std::string> summaries;
  SweepConfig sweep;
  std::filesystem::path out_dir;
};

json to_json(const RunConfig& config);
/// Keys missing from `j` keep their value in `base`.
RunConfig run_config_from_json(const json& j, RunConfig base = {});

void cmd_ingest_check(const RunConfig& config, std::ostream& out);
void cmd_retrieve(const RunConfig& config);
/// Writes filter_result.json, filtered_prompt.txt, original_prompt.txt,
/// scatter.csv, retrieved.csv, features.csv, gmm_models.json and
/// config_echo.json under out_dir.
FilterResult cmd_filter(const RunConfig& config);
/// Prints the filtered (or original) prompt.
void cmd_prompt(const RunConfig& config, bool original, std::ostream& out);
/// Writes summary.csv, per_question.csv, running_avg.csv and config_echo.json.
void cmd_eval(const RunConfig& config);
/// Stacks summary rows from several eval runs into report.csv and writes
/// config_echo.json.
void cmd_report(const RunConfig& config);

/// Parses arguments, runs the subcommand and maps errors to exit codes:
/// 2 configuration, 3 data, 4 embedder, 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ragprune::cli
