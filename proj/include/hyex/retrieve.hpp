#pragma once

// Query-time pipeline: synthesize hypothetical exercises, embed them, average,
// and search. Also the direct-similarity baseline.

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyex/align.hpp"
#include "hyex/core.hpp"
#include "hyex/embed.hpp"
#include "hyex/generate.hpp"
#include "hyex/index.hpp"

namespace hyex {

inline constexpr int kDefaultTopK = 15;

struct RetrieveConfig {
  int k = kDefaultTopK;
  int k_h = kDefaultCandidateCount;
  Side side = Side::L2;
  bool use_head = false;

  void validate() const;
};

struct RetrievalResult {
  Query query;
  Side side = Side::L2;
  std::optional<CandidateSet> candidates;  // absent for direct search
  std::vector<ScoredId> ranked;
  Vector query_vector;
};

/// Componentwise mean, not re-normalized.
Vector average_embeddings(std::span<const Vector> vectors);

/// Everything a retriever needs besides the query. `head` is consulted only
/// when config.use_head is set.
struct RetrievalContext {
  const VectorIndex& index;
  Embedder& embedder;
  Generator* generator = nullptr;
  const ProjectionHead* head = nullptr;
  GenConfig gen;  // k_h and side are overwritten from RetrieveConfig
};

RetrievalResult retrieve_mhyer(const Query& query, const RetrievalContext& ctx, const RetrieveConfig& config);
RetrievalResult retrieve_direct(const Query& query, const RetrievalContext& ctx, const RetrieveConfig& config);

/// Query -> score_all vector over the index, in index id order.
using Scorer = std::function<std::vector<double>(const Query&)>;

Scorer make_mhyer_scorer(const RetrievalContext& ctx, const RetrieveConfig& config);
Scorer make_direct_scorer(const RetrievalContext& ctx, const RetrieveConfig& config);

/// One JSON object per line:
/// `{"query_id","query_text","side","candidates"|null,"ranked":[{"id","score"}],"query_vector"}`.
std::string result_to_json(const RetrievalResult& result);
RetrievalResult result_from_json(const std::string& line);
void save_results(std::span<const RetrievalResult> results, const std::filesystem::path& path);
std::vector<RetrievalResult> load_results(const std::filesystem::path& path);

}  // namespace hyex
