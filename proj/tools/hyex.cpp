// hyex: command-line driver for every pipeline stage. Primary output goes to
// stdout as JSON; logs and errors go to stderr.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 provider error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hyex/align.hpp"
#include "hyex/core.hpp"
#include "hyex/embed.hpp"
#include "hyex/error.hpp"
#include "hyex/evalx.hpp"
#include "hyex/generate.hpp"
#include "hyex/index.hpp"
#include "hyex/retrieve.hpp"
#include "hyex/tatoeba.hpp"

namespace {

using json = nlohmann::json;
using namespace hyex;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitProvider = 4;

struct Providers {
  std::string provider = "mock";
  std::string embed_url;
  std::size_t dim = 64;
  std::string llm_url;
  std::string rules;
  std::string config;
};

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileMissing, path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

std::unique_ptr<Embedder> make_embedder(const Providers& p, std::size_t expected_dim) {
  if (p.provider == "mock") return std::make_unique<MockEmbedder>(expected_dim != 0 ? expected_dim : p.dim);
  if (p.provider == "http") {
    if (p.embed_url.empty()) throw Error(ErrorCode::InvalidArgument, "--embed-url is required with --provider http");
    HttpEmbedderOptions opts;
    opts.base_url = p.embed_url;
    opts.expected_dim = expected_dim;
    return std::make_unique<HttpEmbedder>(opts);
  }
  throw Error(ErrorCode::InvalidArgument, "--provider must be mock or http");
}

std::unique_ptr<Generator> make_generator(const Providers& p) {
  if (p.provider == "mock") {
    if (p.rules.empty()) throw Error(ErrorCode::InvalidArgument, "--rules is required with --provider mock");
    return std::make_unique<MockGenerator>(load_mock_rules(p.rules));
  }
  if (p.llm_url.empty()) throw Error(ErrorCode::InvalidArgument, "--llm-url is required with --provider http");
  return std::make_unique<ChatGenerator>(ChatGeneratorOptions{p.llm_url});
}

GenConfig gen_config(const json& cfg) {
  GenConfig g;
  if (!cfg.contains("generate")) return g;
  const json& s = cfg.at("generate");
  g.l1_name = s.value("l1_name", g.l1_name);
  g.l2_name = s.value("l2_name", g.l2_name);
  g.distribution_description = s.value("distribution_description", g.distribution_description);
  g.model = s.value("model", g.model);
  g.temperature = s.value("temperature", g.temperature);
  g.max_retries = s.value("max_retries", g.max_retries);
  return g;
}

TrainConfig train_config(const json& cfg) {
  const json& s = cfg.contains("train") ? cfg.at("train") : cfg;
  TrainConfig c;
  c.tau = s.value("tau", c.tau);
  c.batch_size = s.value("batch_size", c.batch_size);
  c.epochs = s.value("epochs", c.epochs);
  c.learning_rate = s.value("learning_rate", c.learning_rate);
  const std::string opt = s.value("optimizer", std::string("adam"));
  if (opt != "adam" && opt != "gd") throw Error(ErrorCode::InvalidArgument, "optimizer must be adam or gd");
  c.optimizer = opt == "gd" ? Optimizer::GradientDescent : Optimizer::Adam;
  c.init_noise = s.value("init_noise", c.init_noise);
  c.tied = s.value("tied", c.tied);
  c.dim_out = s.value("dim_out", c.dim_out);
  c.seed = s.value("seed", c.seed);
  return c;
}

/// Store (optionally projected) plus the index built over it.
struct SearchSpace {
  EmbeddingStore base;
  std::optional<ProjectionHead> head;
  VectorIndex index;
};

SearchSpace open_search_space(const std::string& store_path, const std::string& head_path) {
  SearchSpace space;
  space.base = load_store(store_path);
  if (!head_path.empty()) space.head = load_head(head_path);
  if (space.head && !space.base.spec().projection_id) {
    space.index = build_index(apply_head(space.base, *space.head, space.base.spec().side));
  } else {
    if (space.base.spec().projection_id && (!space.head || *space.base.spec().projection_id != space.head->projection_id())) {
      throw Error(ErrorCode::SpecMismatch, store_path + " is projected; pass the matching --head");
    }
    space.index = build_index(space.base);
  }
  return space;
}

std::size_t base_dim(const SearchSpace& space) {
  return space.head ? space.head->dim_in() : space.index.dim();
}

std::vector<ExerciseId> read_ranking(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileMissing, path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first_line = text.substr(0, text.find('\n'));
  std::vector<ExerciseId> ids;
  const json parsed = json::parse(first_line, nullptr, false);
  if (parsed.is_object() && parsed.contains("ranked")) {
    for (const auto& r : result_from_json(first_line).ranked) ids.push_back(r.id);
    return ids;
  }
  const json whole = json::parse(text, nullptr, false);
  if (whole.is_array()) return whole.get<std::vector<ExerciseId>>();
  std::istringstream tokens(text);
  std::string tok;
  while (tokens >> tok) {
    try {
      std::size_t used = 0;
      ids.push_back(std::stoll(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, path + ": not an id: '" + tok + "'");
    }
  }
  return ids;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}


}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hyex"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Zero-shot exercise retrieval with hypothetical exercises"};
  app.require_subcommand(1);

  Providers providers;
  std::uint64_t seed = 42;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto add_provider_flags = [&](CLI::App* cmd, bool generator) {
    cmd->add_option("--provider", providers.provider, "mock or http")->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--embed-url", providers.embed_url, "Embedding service base URL");
    cmd->add_option("--dim", providers.dim, "Mock embedding dimension")->check(CLI::Range(2, 1 << 20));
    if (generator) {
      cmd->add_option("--llm-url", providers.llm_url, "OpenAI-compatible base URL");
      cmd->add_option("--rules", providers.rules, "Mock generator rules (JSONL)");
      cmd->add_option("--config", providers.config, "JSON config with a \"generate\" section");
    }
  };

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Embed one side of a corpus into a store");
  std::string corpus_path, side_text = "l2", out_path;
  embed_cmd->add_option("--corpus", corpus_path)->required();
  embed_cmd->add_option("--side", side_text)->check(CLI::IsMember({"l1", "l2"}));
  embed_cmd->add_option("--out", out_path)->required();
  add_provider_flags(embed_cmd, false);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a projection head with the contrastive loss");
  std::string l1_store, l2_store, train_config_path;
  train_cmd->add_option("--l1-store", l1_store)->required();
  train_cmd->add_option("--l2-store", l2_store)->required();
  train_cmd->add_option("--config", train_config_path);
  train_cmd->add_option("--out", out_path)->required();
  auto* train_seed = train_cmd->add_option("--seed", seed);

  // retrieve
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Retrieve exercises for a learner query");
  std::string query_text, store_path, head_path;
  int k = kDefaultTopK, k_h = kDefaultCandidateCount;
  bool direct = false;
  retrieve_cmd->add_option("--query", query_text)->required();
  retrieve_cmd->add_option("--index-store", store_path)->required();
  retrieve_cmd->add_option("--k", k)->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--kh", k_h)->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--side", side_text)->check(CLI::IsMember({"l1", "l2"}));
  retrieve_cmd->add_flag("--direct", direct, "Embed the query itself instead of hypothetical exercises");
  retrieve_cmd->add_option("--head", head_path);
  retrieve_cmd->add_option("--seed", seed);
  add_provider_flags(retrieve_cmd, true);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a retriever");
  eval_cmd->require_subcommand(1);
  std::string judgments_path, bench_path, report_path;
  auto* eval_j = eval_cmd->add_subcommand("judgments", "AUC and accuracy on labeled judgments");
  eval_j->add_option("--judgments", judgments_path)->required();
  auto* eval_t = eval_cmd->add_subcommand("tags", "P@k and pooled AUC on a tag benchmark");
  eval_t->add_option("--bench", bench_path)->required();
  for (auto* cmd : {eval_j, eval_t}) {
    cmd->add_option("--store", store_path)->required();
    cmd->add_option("--head", head_path);
    cmd->add_option("--k", k)->check(CLI::PositiveNumber);
    cmd->add_option("--kh", k_h)->check(CLI::PositiveNumber);
    cmd->add_flag("--direct", direct);
    cmd->add_option("--out", report_path, "Also write report.json here");
    cmd->add_option("--seed", seed);
    add_provider_flags(cmd, true);
  }

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Build benchmarks");
  bench_cmd->require_subcommand(1);
  auto* bench_t = bench_cmd->add_subcommand("tatoeba", "Tag benchmark from Tatoeba exports");
  std::string sentences_path, links_path, tags_path, bench_config, out_dir;
  bench_t->add_option("--sentences", sentences_path)->required();
  bench_t->add_option("--links", links_path)->required();
  bench_t->add_option("--tags", tags_path)->required();
  bench_t->add_option("--config", bench_config)->required();
  bench_t->add_option("--out-dir", out_dir)->required();

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Sampling utilities");
  sample_cmd->require_subcommand(1);
  auto* sample_t = sample_cmd->add_subcommand("tiers", "Tiered 5/5/5 sample from a ranking of >= 555 ids");
  std::string ranking_path;
  sample_t->add_option("--ranking", ranking_path)->required();
  sample_t->add_option("--seed", seed);

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Analysis exports");
  analyze_cmd->require_subcommand(1);
  auto* analyze_len = analyze_cmd->add_subcommand("lengths", "Top-m retrieved length histograms");
  std::vector<std::string> results_paths;
  std::size_t top_m = 3;
  analyze_len->add_option("--results", results_paths, "Result JSONL, optionally NAME=PATH; repeatable")->required();
  analyze_len->add_option("--corpus", corpus_path)->required();
  analyze_len->add_option("--top", top_m)->check(CLI::PositiveNumber);
  auto* analyze_pca = analyze_cmd->add_subcommand("pca", "2-D PCA projection of embedding stores");
  std::string stores_list, labels_list;
  analyze_pca->add_option("--stores", stores_list)->required();
  analyze_pca->add_option("--labels", labels_list)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*embed_cmd) {
      const Corpus corpus = load_corpus(corpus_path);
      auto embedder = make_embedder(providers, providers.provider == "mock" ? providers.dim : 0);
      const EmbeddingStore store = embed_corpus(corpus, parse_side(side_text), *embedder);
      save_store(store, out_path);
      std::cout << json{{"out", out_path}, {"n", store.size()}, {"dim", store.dim()}}.dump() << '\n';
    } else if (*train_cmd) {
      TrainConfig config = train_config(read_config(train_config_path));
      if (train_seed->count() > 0) config.seed = seed;
      const EmbeddingStore a = load_store(l1_store);
      const EmbeddingStore b = load_store(l2_store);
      const TrainResult result = train(a, b, config);
      save_head(result.head, out_path);
      std::cout << json{{"out", out_path},
                        {"projection_id", result.head.projection_id()},
                        {"loss_trace", result.loss_trace}}
                       .dump()
                << '\n';
    } else if (*retrieve_cmd) {
      const SearchSpace space = open_search_space(store_path, head_path);
      auto embedder = make_embedder(providers, base_dim(space));
      std::unique_ptr<Generator> generator = direct ? nullptr : make_generator(providers);
      RetrieveConfig rc{k, k_h, parse_side(side_text), space.head.has_value()};
      RetrievalContext ctx{space.index, *embedder, generator.get(), space.head ? &*space.head : nullptr,
                           gen_config(read_config(providers.config))};
      const Query query{"q", query_text, "l1"};
      const RetrievalResult result = direct ? retrieve_direct(query, ctx, rc) : retrieve_mhyer(query, ctx, rc);
      std::cout << result_to_json(result) << '\n';
    } else if (*eval_cmd) {
      const SearchSpace space = open_search_space(store_path, head_path);
      auto embedder = make_embedder(providers, base_dim(space));
      std::unique_ptr<Generator> generator = direct ? nullptr : make_generator(providers);
      RetrieveConfig rc{k, k_h, space.index.spec().side, space.head.has_value()};
      RetrievalContext ctx{space.index, *embedder, generator.get(), space.head ? &*space.head : nullptr,
                           gen_config(read_config(providers.config))};
      const Scorer scorer = direct ? make_direct_scorer(ctx, rc) : make_mhyer_scorer(ctx, rc);
      EvalReport report;
      if (*eval_j) {
        report = eval_judgments(load_judgments(judgments_path), space.index, scorer);
      } else {
        report = eval_tags(load_tag_benchmark(bench_path), space.index, scorer, k);
      }
      if (!report_path.empty()) save_report(report, report_path);
      std::cout << report_to_json(report) << '\n';
    } else if (*bench_cmd) {
      const auto config = tatoeba::load_build_config(bench_config);
      const auto output = tatoeba::build_benchmark(sentences_path, links_path, tags_path, config);
      tatoeba::write_build(output, out_dir);
      std::cerr << tatoeba::summarize_build(output.report);
      std::cout << tatoeba::report_to_json(output.report) << '\n';
    } else if (*sample_cmd) {
      const TierSample s = tier_sample(read_ranking(ranking_path), seed);
      std::cout << json{{"seed", s.seed}, {"tier1", s.tier1}, {"tier2", s.tier2}, {"tier3", s.tier3}}.dump() << '\n';
    } else if (*analyze_len) {
      const Corpus corpus = load_corpus(corpus_path);
      std::vector<std::pair<std::string, std::vector<RetrievalResult>>> runs;
      for (const auto& spec : results_paths) {
        const auto eq = spec.find('=');
        const std::string name = eq == std::string::npos ? spec : spec.substr(0, eq);
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        runs.emplace_back(name, load_results(path));
      }
      const LengthReport report = length_analysis(runs, corpus, top_m);
      for (const LengthSeries& s : report.series) {
        spdlog::info("{}: {} lengths, mean {:.2f}", s.name, s.lengths.size(), s.mean);
        for (const auto& [lo, count] : s.buckets) {
          std::cout << json{{"series", s.name}, {"bucket_lo", lo}, {"count", count}}.dump() << '\n';
        }
      }
    } else if (*analyze_pca) {
      const auto stores = split_commas(stores_list);
      const auto labels = split_commas(labels_list);
      if (stores.size() != labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "--stores and --labels must have the same length");
      }
      std::vector<Vector> vectors;
      std::vector<std::string> groups;
      for (std::size_t i = 0; i < stores.size(); ++i) {
        const EmbeddingStore store = load_store(stores[i]);
        for (const auto& v : store.vectors()) {
          vectors.push_back(v);
          groups.push_back(labels[i]);
        }
      }
      const PcaResult result = pca_project(vectors, groups);
      for (const auto& p : result.points) {
        std::cout << json{{"group", p.group}, {"x", p.coords[0]}, {"y", p.coords[1]}}.dump() << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.code()))}, {"message", e.detail()}}.dump() << '\n';
    if (e.code() == ErrorCode::InvalidArgument) return kExitUsage;
    return e.is_provider_error() ? kExitProvider : kExitData;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return kExitData;
  }
  return 0;
}
