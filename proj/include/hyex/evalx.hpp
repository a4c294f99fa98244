#pragma once

// Retrieval evaluation: pooled AUC, threshold-sweep accuracy, Precision@K,
// the tiered sampler used to build judgment sets, length-bias histograms and
// a 2-D PCA export of embedding clouds.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hyex/core.hpp"
#include "hyex/index.hpp"
#include "hyex/retrieve.hpp"

namespace hyex {

struct ScoredPair {
  std::string query_id;
  ExerciseId exercise_id = 0;
  double score = 0.0;
  int label = 0;
};

/// Mann-Whitney AUC with midranks for tied scores. Throws DegenerateLabels
/// unless both labels occur.
double auc(std::span<const ScoredPair> pairs);

/// Threshold grid for accuracy_sweep: k/10 - 1 for k = 0..19.
inline constexpr int kThresholdSteps = 20;
double sweep_threshold(int step);

struct SweepResult {
  double best_accuracy = 0.0;
  double best_threshold = -1.0;
};

/// Predicts relevant iff score > threshold; returns the best accuracy over the
/// grid and the smallest threshold reaching it. Throws EmptyPairs.
SweepResult accuracy_sweep(std::span<const ScoredPair> pairs);

/// |top-k ∩ relevant| / k. The denominator stays k when fewer results exist.
double precision_at_k(std::span<const ExerciseId> ranked, const std::unordered_set<ExerciseId>& relevant,
                      std::size_t k);

struct EvalReport {
  /// Unset when the pooled labels are all 0 or all 1.
  std::optional<double> auc;
  double best_accuracy = 0.0;
  double best_threshold = -1.0;
  std::optional<double> precision_at_k;
  std::optional<int> k;
  std::size_t n_pairs = 0;
  std::size_t n_queries = 0;
  Side side = Side::L2;
};

std::string report_to_json(const EvalReport& report);
void save_report(const EvalReport& report, const std::filesystem::path& path);

/// Scores each judged pair with the scorer's score_all vector; pools all pairs.
EvalReport eval_judgments(const JudgmentSet& judgments, const VectorIndex& index, const Scorer& scorer);

/// Macro-averaged P@k over tags (top-k taken from the scorer's scores under the
/// index tie rule) and pooled AUC over every (tag, exercise) pair.
EvalReport eval_tags(const TagBenchmark& bench, const VectorIndex& index, const Scorer& scorer,
                     int k = kDefaultTopK);

inline constexpr std::size_t kTierPoolSize = 555;
inline constexpr std::size_t kTierTopSize = 5;
inline constexpr std::size_t kTierMidEnd = 55;  // ranks 6..55
inline constexpr std::size_t kTierDrawSize = 5;

struct TierSample {
  std::vector<ExerciseId> tier1;  // ranks 1-5
  std::vector<ExerciseId> tier2;  // 5 of ranks 6-55
  std::vector<ExerciseId> tier3;  // 5 of ranks 56-555
  std::uint64_t seed = 0;

  std::vector<ExerciseId> all() const;
};

/// Throws RankingTooShort below 555 entries, InvalidArgument on duplicate ids.
TierSample tier_sample(std::span<const ExerciseId> ranking, std::uint64_t seed);

/// Number of Unicode scalar values in a UTF-8 string.
std::size_t char_count(std::string_view utf8);

inline constexpr std::size_t kLengthBucketWidth = 5;

struct LengthSeries {
  std::string name;
  std::vector<std::size_t> lengths;
  double mean = 0.0;
  std::map<std::size_t, std::size_t> buckets;  // bucket_lo -> count
};

struct LengthReport {
  std::vector<LengthSeries> series;  // retrievers in input order, then "corpus"
};

/// Character lengths of each query's top-m retrieved texts per retriever, plus
/// the whole corpus, bucketed by kLengthBucketWidth. Texts are taken from the
/// side each result was retrieved on.
LengthReport length_analysis(const std::vector<std::pair<std::string, std::vector<RetrievalResult>>>& runs,
                             const Corpus& corpus, std::size_t top_m = 3);

/// JSONL `{"series","bucket_lo","count"}`.
void save_length_histogram(const LengthReport& report, const std::filesystem::path& path);

struct ProjectedPoint {
  std::string group;
  Vector coords;  // out_dim entries
};

struct PcaResult {
  std::vector<ProjectedPoint> points;
  std::vector<double> explained_variance;  // per component, descending
  std::vector<Vector> components;          // unit directions in input space
};

/// Mean-centers, then finds leading principal directions by power iteration
/// with deflation (at most 100 iterations per direction, or until the relative
/// eigenvalue change drops below 1e-10). Each direction's first nonzero
/// component is made positive. Throws DegenerateData for fewer than 3 points,
/// out_dim >= d, or data with no variance.
PcaResult pca_project(std::span<const Vector> vectors, std::span<const std::string> groups,
                      std::size_t out_dim = 2);

/// JSONL `{"group","x","y"}` from the first two coordinates.
void save_projection(const PcaResult& result, const std::filesystem::path& path);

}  // namespace hyex
