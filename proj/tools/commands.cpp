#include "commands.hpp"

#include "ragprune/csv.hpp"
#include "ragprune/embedder.hpp"
#include "ragprune/evaluation.hpp"
#include "ragprune/prompt.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <ostream>

namespace ragprune::cli {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

void require_out_dir(const RunConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("--out-dir is required");
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw DataError("cannot create " + config.out_dir.string() + ": " + ec.message());
}

void write_json(const json& j, const std::filesystem::path& path) { csv::write_file(path, j.dump(2) + "\n"); }

void write_config_echo(const RunConfig& config) { write_json(to_json(config), config.out_dir / "config_echo.json"); }

/// Exactly one embedding source; `allow_query_file` admits --query-embedding.
void check_sources(const RunConfig& config, bool allow_query_file) {
  int sources = (config.embedder_url.empty() ? 0 : 1) + (config.embedding_cache.empty() ? 0 : 1);
  if (allow_query_file) sources += config.query_embedding.empty() ? 0 : 1;
  if (!config.query_embedding.empty() && !allow_query_file) {
    throw ConfigError("--query-embedding does not apply here; use --embedder-url or --embedding-cache");
  }
  if (sources != 1) {
    throw ConfigError(allow_query_file
                          ? "configure exactly one of --query-embedding, --embedder-url, --embedding-cache"
                          : "configure exactly one of --embedder-url, --embedding-cache");
  }
  if (!config.embedder_cache.empty() && config.embedder_url.empty()) {
    throw ConfigError("--embedder-cache needs --embedder-url");
  }
}

std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& config) {
  if (!config.embedder_url.empty()) {
    auto cache = config.embedder_cache.empty() ? std::make_shared<EmbeddingCache>()
                                               : std::make_shared<EmbeddingCache>(config.embedder_cache);
    return std::make_unique<HttpEmbeddingProvider>(
        EmbedderEndpoint{config.embedder_url, config.timeout, config.expected_dim}, std::move(cache));
  }
  return offline_provider(config.embedding_cache);
}

Eigen::VectorXd read_query_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open query embedding " + path);
  std::vector<double> values;
  try {
    values = json::parse(in).get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError("query embedding " + path + ": expected a JSON array of numbers (" + e.what() + ")");
  }
  if (values.empty()) throw DataError("query embedding " + path + " is empty");
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

Eigen::VectorXd query_vector(const RunConfig& config) {
  check_sources(config, true);
  if (!config.query_embedding.empty()) return read_query_file(config.query_embedding);
  if (config.query.empty()) throw ConfigError("--query is required to embed the query");
  return make_provider(config)->embed({config.query}).at(0);
}

RetrievedSet retrieve(const RunConfig& config) {
  config.sweep.validate();
  if (config.corpus.empty()) throw ConfigError("--corpus is required");
  const Corpus corpus = ingest_jsonl(config.corpus);
  const Eigen::VectorXd query = query_vector(config);
  if (query.size() != corpus.dimension()) {
    throw DataError("query has dimension " + std::to_string(query.size()) + ", corpus has " +
                    std::to_string(corpus.dimension()));
  }
  return top_k(corpus, query, config.sweep.num_docs);
}

struct FilterRun {
  RetrievedSet hits;
  SweepResult sweep;
  FilterResult result;
  PromptBundle prompts;
};

std::vector<std::string> texts_for(const RetrievedSet& hits, const std::vector<std::string>& ids) {
  std::map<std::string, const std::string*> by_id;
  for (const auto& hit : hits.hits) by_id[hit.record.id] = &hit.record.text;
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(*by_id.at(id));
  return out;
}

FilterRun run_filter(const RunConfig& config) {
  const std::string question = config.question.empty() ? config.query : config.question;
  if (question.empty()) throw ConfigError("--question (or --query) is required for the prompt");

  FilterRun run;
  run.hits = retrieve(config);
  run.sweep = run_sweep(run.hits, centroid_of(run.hits), config.sweep);
  auto votes = vote_outliers(run.sweep.cells, config.sweep.min_outlier_freq);
  run.result = filter_context(run.hits, votes.outliers);
  run.result.tally = std::move(votes.tally);
  run.result.cells = run.sweep.cells;
  if (!run.sweep.stats.constant_columns.empty()) {
    run.result.warnings.push_back(std::to_string(run.sweep.stats.constant_columns.size()) +
                                  " constant feature column(s) standardized to zero");
  }
  run.prompts = make_prompt_bundle(texts_for(run.hits, run.result.kept_ids),
                                   texts_for(run.hits, run.result.original_ids), question);
  return run;
}

/// First cell fitted in two dimensions, else the first cell with its leading
/// coordinates (pc2 = 0 when one-dimensional). Flags are the final votes.
std::vector<ScatterRow> final_scatter(const FilterRun& run) {
  const SweepCell* chosen = &run.sweep.cells.front();
  for (const auto& cell : run.sweep.cells) {
    if (cell.effective_dim == 2) {
      chosen = &cell;
      break;
    }
  }
  const auto labels = gmm_predict(chosen->model, chosen->reduced);
  const std::set<std::string> dropped(run.result.dropped_ids.begin(), run.result.dropped_ids.end());
  std::vector<ScatterRow> rows;
  for (Index i = 0; i < chosen->reduced.rows(); ++i) {
    const auto& id = chosen->decision.doc_ids[static_cast<std::size_t>(i)];
    rows.push_back({id, chosen->reduced(i, 0), chosen->reduced.cols() > 1 ? chosen->reduced(i, 1) : 0.0,
                    labels[static_cast<std::size_t>(i)], dropped.count(id) > 0});
  }
  return rows;
}

}  // namespace

json to_json(const RunConfig& config) {
  json j = {{"corpus", config.corpus},
            {"query", config.query},
            {"query_embedding", config.query_embedding},
            {"question", config.question},
            {"embedder_url", config.embedder_url},
            {"embedder_cache", config.embedder_cache},
            {"embedding_cache", config.embedding_cache},
            {"timeout", config.timeout},
            {"expected_dim", config.expected_dim ? json(*config.expected_dim) : json(nullptr)},
            {"triples", config.triples},
            {"experiment_id", config.experiment_id},
            {"category", config.category},
            {"summaries", config.summaries}};
  j.update(ragprune::to_json(config.sweep));
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = std::move(base);
  c.corpus = get_or(j, "corpus", c.corpus);
  c.query = get_or(j, "query", c.query);
  c.query_embedding = get_or(j, "query_embedding", c.query_embedding);
  c.question = get_or(j, "question", c.question);
  c.embedder_url = get_or(j, "embedder_url", c.embedder_url);
  c.embedder_cache = get_or(j, "embedder_cache", c.embedder_cache);
  c.embedding_cache = get_or(j, "embedding_cache", c.embedding_cache);
  c.timeout = get_or(j, "timeout", c.timeout);
  if (j.contains("expected_dim")) {
    c.expected_dim = j["expected_dim"].is_null() ? std::nullopt : std::optional<Index>(get_or<Index>(j, "expected_dim", 0));
  }
  c.triples = get_or(j, "triples", c.triples);
  c.experiment_id = get_or(j, "experiment_id", c.experiment_id);
  c.category = get_or(j, "category", c.category);
  c.summaries = get_or(j, "summaries", c.summaries);
  c.sweep = sweep_config_from_json(j, c.sweep);
  return c;
}

void cmd_ingest_check(const RunConfig& config, std::ostream& out) {
  if (config.corpus.empty()) throw ConfigError("--corpus is required");
  const Corpus corpus = ingest_jsonl(config.corpus);
  out << corpus.size() << " records, dimension " << corpus.dimension() << "\n";
}

void cmd_retrieve(const RunConfig& config) {
  require_out_dir(config);
  write_retrieved_csv(retrieve(config), config.out_dir / "retrieved.csv");
  write_config_echo(config);
}

FilterResult cmd_filter(const RunConfig& config) {
  require_out_dir(config);
  auto run = run_filter(config);
  const auto& dir = config.out_dir;

  write_retrieved_csv(run.hits, dir / "retrieved.csv");
  write_features_csv(run.sweep.features, dir / "features.csv");

  json result = to_json(run.result);
  result["prompt"] = {{"question", run.prompts.question},
                      {"context_token_estimate", run.prompts.context_token_estimate},
                      {"original_token_estimate", run.prompts.original_token_estimate},
                      {"warnings", run.prompts.warnings}};
  result["config"] = to_json(config);
  write_json(result, dir / "filter_result.json");

  json models = json::array();
  for (const auto& cell : run.sweep.cells) {
    models.push_back({{"clusters", cell.clusters}, {"pca_dim", cell.requested_dim}, {"model", to_json(cell.model)}});
  }
  write_json(models, dir / "gmm_models.json");

  csv::write_file(dir / "filtered_prompt.txt", run.prompts.filtered_prompt);
  csv::write_file(dir / "original_prompt.txt", run.prompts.original_prompt);
  write_scatter_csv(final_scatter(run), dir / "scatter.csv");
  write_config_echo(config);
  return run.result;
}

void cmd_prompt(const RunConfig& config, bool original, std::ostream& out) {
  const auto run = run_filter(config);
  out << (original ? run.prompts.original_prompt : run.prompts.filtered_prompt);
}

void cmd_eval(const RunConfig& config) {
  require_out_dir(config);
  if (config.triples.empty()) throw ConfigError("--triples is required");
  check_sources(config, false);
  const auto triples = read_triples_jsonl(config.triples);
  const auto provider = make_provider(config);
  const auto report = evaluate_batch(triples, *provider, config.sweep);
  export_report(report, {config.experiment_id, config.category}, config.out_dir);
  write_config_echo(config);
}

void cmd_report(const RunConfig& config) {
  require_out_dir(config);
  if (config.summaries.empty()) throw ConfigError("--summaries needs at least one summary.csv");
  const std::string header = summary_header();
  std::string out = header;
  for (const auto& path : config.summaries) {
    const std::string text = csv::read_file(path);
    if (text.compare(0, header.size(), header) != 0) throw DataError(path + ": not a summary.csv (header mismatch)");
    out += text.substr(header.size());
    if (out.back() != '\n') out += '\n';
  }
  csv::write_file(config.out_dir / "report.csv", out);
  write_config_echo(config);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Outlier-based pruning of retrieved RAG context", "ragprune"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig flags;
  std::string config_path, method;
  double alpha = 0, percentile = 0;
  Index min_freq = 0, num_docs = 0, expected_dim = 0;
  int degree = 2;
  std::uint64_t seed = 0;
  std::vector<Index> clusters, pca_dims;
  std::string out_dir;
  bool original = false;

  app.add_option("--config", config_path, "JSON config; flags override its values");
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  const auto text = [&](const char* name, std::string RunConfig::*field, const char* help) {
    auto* opt = app.add_option(name, flags.*field, help);
    overrides.emplace_back(opt, [field, &flags](RunConfig& c) { c.*field = flags.*field; });
  };
  text("--corpus", &RunConfig::corpus, "corpus JSONL (id, text, vector)");
  text("--query", &RunConfig::query, "query text");
  text("--query-embedding", &RunConfig::query_embedding, "query vector as a JSON array file");
  text("--question", &RunConfig::question, "question placed in the prompt (defaults to --query)");
  text("--embedder-url", &RunConfig::embedder_url, "embedding service base URL");
  text("--embedder-cache", &RunConfig::embedder_cache, "write-through cache for --embedder-url");
  text("--embedding-cache", &RunConfig::embedding_cache, "offline embedding cache JSONL");
  text("--triples", &RunConfig::triples, "response triples JSONL");
  text("--experiment-id", &RunConfig::experiment_id, "label for summary rows");
  text("--category", &RunConfig::category, "question category for summary rows");

  const auto add = [&](CLI::Option* opt, std::function<void(RunConfig&)> apply) {
    overrides.emplace_back(opt, std::move(apply));
  };
  add(app.add_option("--timeout", flags.timeout, "embedder timeout in seconds"),
      [&](RunConfig& c) { c.timeout = flags.timeout; });
  add(app.add_option("--expected-dim", expected_dim, "required embedding dimension"),
      [&](RunConfig& c) { c.expected_dim = expected_dim; });
  add(app.add_option("--summaries", flags.summaries, "summary.csv files to stack")->delimiter(','),
      [&](RunConfig& c) { c.summaries = flags.summaries; });
  add(app.add_option("--percentile", percentile, "outlier percentile"),
      [&](RunConfig& c) { c.sweep.percentile = percentile; });
  add(app.add_option("--clusters", clusters, "GMM component counts, e.g. 4,5,6")->delimiter(','),
      [&](RunConfig& c) { c.sweep.cluster_counts = clusters; });
  add(app.add_option("--pca-dims", pca_dims, "PCA dimensions, e.g. 2,3")->delimiter(','),
      [&](RunConfig& c) { c.sweep.pca_dims = pca_dims; });
  add(app.add_option("--min-freq", min_freq, "cells that must flag a document"),
      [&](RunConfig& c) { c.sweep.min_outlier_freq = min_freq; });
  add(app.add_option("--alpha", alpha, "query-distance weight in [0, 1]"),
      [&](RunConfig& c) { c.sweep.weighting.alpha = alpha; });
  auto* degree_opt = app.add_option("--degree", degree, "polynomial degree");
  add(app.add_option("--method", method, "concatenate, weighted_sum, interaction, polynomial[:d]"),
      [&](RunConfig& c) {
        c.sweep.method = parse_feature_method(method, degree_opt->count() > 0 ? degree : c.sweep.method.degree);
      });
  add(degree_opt, [&](RunConfig& c) {
    if (c.sweep.method.kind == FeatureKind::polynomial) c.sweep.method.degree = degree;
  });
  add(app.add_option("--seed", seed, "base seed"), [&](RunConfig& c) { c.sweep.seed = seed; });
  add(app.add_option("--num-docs", num_docs, "documents retrieved"),
      [&](RunConfig& c) { c.sweep.num_docs = num_docs; });
  add(app.add_option("--out-dir", out_dir, "directory for all artifacts"),
      [&](RunConfig& c) { c.out_dir = out_dir; });

  auto* ingest = app.add_subcommand("ingest-check", "validate a corpus and print its size");
  auto* retrieve_cmd = app.add_subcommand("retrieve", "write the top-k retrieval");
  auto* filter = app.add_subcommand("filter", "run the sweep and write the pruned context");
  auto* prompt = app.add_subcommand("prompt", "print the filtered prompt");
  prompt->add_flag("--original", original, "print the unfiltered prompt instead");
  auto* eval = app.add_subcommand("eval", "score response triples");
  auto* report = app.add_subcommand("report", "stack summary rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ragprune: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw ConfigError("cannot open config " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config " + config_path + ": " + e.what());
      }
      config = run_config_from_json(j);
    }
    for (const auto& [opt, apply] : overrides) {
      if (opt->count() > 0) apply(config);
    }

    if (*ingest) {
      cmd_ingest_check(config, out);
    } else if (*retrieve_cmd) {
      cmd_retrieve(config);
    } else if (*filter) {
      const auto result = cmd_filter(config);
      out << "kept " << result.kept_ids.size() << ", dropped " << result.dropped_ids.size() << "\n";
      for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    } else if (*prompt) {
      cmd_prompt(config, original, out);
    } else if (*eval) {
      cmd_eval(config);
    } else if (*report) {
      cmd_report(config);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "ragprune: config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "ragprune: data error: " << e.what() << "\n";
    return 3;
  } catch (const EmbedderError& e) {
    err << "ragprune: embedder error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "ragprune: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ragprune::cli
