#include "hyex/retrieve.hpp"

#include "hyex/error.hpp"
#include "jsonl.hpp"

namespace hyex {

using detail::json;

void RetrieveConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (k_h < 1) throw Error(ErrorCode::InvalidArgument, "k_h must be >= 1");
}

Vector average_embeddings(std::span<const Vector> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyList, "nothing to average");
  const std::size_t dim = vectors.front().size();
  Vector mean(dim, 0.0);
  for (const Vector& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::DimMismatch, std::to_string(v.size()) + " vs " + std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
  }
  const auto m = static_cast<double>(vectors.size());
  for (double& x : mean) x /= m;
  return mean;
}

namespace {

void check_context(const RetrievalContext& ctx, const RetrieveConfig& config) {
  config.validate();
  if (ctx.index.spec().side != config.side) {
    throw Error(ErrorCode::InvalidArgument, "index holds " + std::string(to_string(ctx.index.spec().side)) +
                                                " vectors but retrieval side is " + std::string(to_string(config.side)));
  }
  if (config.use_head) {
    if (ctx.head == nullptr) throw Error(ErrorCode::InvalidArgument, "use_head set without a projection head");
    if (ctx.index.spec().projection_id != ctx.head->projection_id()) {
      throw Error(ErrorCode::SpecMismatch, "index was not projected with this head");
    }
  } else if (ctx.index.spec().projection_id) {
    throw Error(ErrorCode::SpecMismatch, "index is projected; retrieval must use the same head");
  }
}

std::vector<Vector> embed_for_search(std::span<const std::string> texts, const RetrievalContext& ctx,
                                     const RetrieveConfig& config) {
  auto vectors = embed_batch(texts, config.side, ctx.embedder);
  if (config.use_head) {
    for (auto& v : vectors) v = project(*ctx.head, config.side, v);
  }
  return vectors;
}

RetrievalResult finish(RetrievalResult result, const RetrievalContext& ctx, const RetrieveConfig& config) {
  const auto scores = score_all(ctx.index, result.query_vector);
  result.ranked = top_k(ctx.index.ids(), scores, static_cast<std::size_t>(config.k));
  return result;
}

Vector mhyer_query_vector(const Query& query, const RetrievalContext& ctx, const RetrieveConfig& config,
                          CandidateSet& candidates_out) {
  if (ctx.generator == nullptr) throw Error(ErrorCode::InvalidArgument, "hypothetical retrieval needs a generator");
  GenConfig gen = ctx.gen;
  gen.k_h = config.k_h;
  gen.side = config.side;
  candidates_out = generate_candidates(gen, query, *ctx.generator);
  const auto vectors = embed_for_search(candidates_out.candidates, ctx, config);
  return average_embeddings(vectors);
}

Vector direct_query_vector(const Query& query, const RetrievalContext& ctx, const RetrieveConfig& config) {
  const std::vector<std::string> texts{query.text};
  return embed_for_search(texts, ctx, config).front();
}

}  // namespace

RetrievalResult retrieve_mhyer(const Query& query, const RetrievalContext& ctx, const RetrieveConfig& config) {
  check_context(ctx, config);
  RetrievalResult result;
  result.query = query;
  result.side = config.side;
  CandidateSet candidates;
  result.query_vector = mhyer_query_vector(query, ctx, config, candidates);
  result.candidates = std::move(candidates);
  return finish(std::move(result), ctx, config);
}

RetrievalResult retrieve_direct(const Query& query, const RetrievalContext& ctx, const RetrieveConfig& config) {
  check_context(ctx, config);
  RetrievalResult result;
  result.query = query;
  result.side = config.side;
  result.query_vector = direct_query_vector(query, ctx, config);
  return finish(std::move(result), ctx, config);
}

Scorer make_mhyer_scorer(const RetrievalContext& ctx, const RetrieveConfig& config) {
  check_context(ctx, config);
  return [&ctx, config](const Query& query) {
    CandidateSet unused;
    return score_all(ctx.index, mhyer_query_vector(query, ctx, config, unused));
  };
}

Scorer make_direct_scorer(const RetrievalContext& ctx, const RetrieveConfig& config) {
  check_context(ctx, config);
  return [&ctx, config](const Query& query) {
    return score_all(ctx.index, direct_query_vector(query, ctx, config));
  };
}

std::string result_to_json(const RetrievalResult& result) {
  json ranked = json::array();
  for (const ScoredId& s : result.ranked) ranked.push_back({{"id", s.id}, {"score", s.score}});
  const json obj = {{"query_id", result.query.id},
                    {"query_text", result.query.text},
                    {"side", std::string(to_string(result.side))},
                    {"candidates", result.candidates ? json(result.candidates->candidates) : json(nullptr)},
                    {"ranked", ranked},
                    {"query_vector", result.query_vector}};
  return obj.dump();
}

RetrievalResult result_from_json(const std::string& line) {
  try {
    const json obj = json::parse(line);
    RetrievalResult r;
    r.query.id = obj.at("query_id").get<std::string>();
    r.query.text = obj.value("query_text", std::string());
    r.side = parse_side(obj.at("side").get<std::string>());
    if (const auto& c = obj.at("candidates"); !c.is_null()) {
      r.candidates = CandidateSet{r.query, r.side, c.get<std::vector<std::string>>()};
    }
    for (const auto& item : obj.at("ranked")) {
      r.ranked.push_back({item.at("id").get<ExerciseId>(), item.at("score").get<double>()});
    }
    r.query_vector = obj.value("query_vector", Vector{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("retrieval result: ") + e.what());
  }
}

void save_results(std::span<const RetrievalResult> results, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& r : results) out << result_to_json(r) << '\n';
}

std::vector<RetrievalResult> load_results(const std::filesystem::path& path) {
  std::vector<RetrievalResult> results;
  detail::for_each_jsonl(path, [&](const json& obj, std::size_t) { results.push_back(result_from_json(obj.dump())); });
  return results;
}

}  // namespace hyex
