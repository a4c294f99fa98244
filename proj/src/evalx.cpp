#include "hyex/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "hyex/error.hpp"
#include "jsonl.hpp"

namespace hyex {

using detail::json;

double auc(std::span<const ScoredPair> pairs) {
  std::size_t n_pos = 0;
  for (const auto& p : pairs) n_pos += p.label == 1 ? 1 : 0;
  const std::size_t n_neg = pairs.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorCode::DegenerateLabels, std::to_string(n_pos) + " positives, " + std::to_string(n_neg) + " negatives");
  }

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pairs[a].score < pairs[b].score; });

  // Midranks: a run of equal scores occupying 1-based ranks [lo, hi] gets (lo+hi)/2.
  double rank_sum_pos = 0.0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end + 1 < order.size() && pairs[order[end + 1]].score == pairs[order[start]].score) ++end;
    const double midrank = (static_cast<double>(start + 1) + static_cast<double>(end + 1)) / 2.0;
    for (std::size_t i = start; i <= end; ++i) {
      if (pairs[order[i]].label == 1) rank_sum_pos += midrank;
    }
    start = end + 1;
  }
  const auto p = static_cast<double>(n_pos);
  const auto n = static_cast<double>(n_neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

double sweep_threshold(int step) { return static_cast<double>(step) / 10.0 - 1.0; }

SweepResult accuracy_sweep(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyPairs, "accuracy sweep over no pairs");
  SweepResult best{-1.0, sweep_threshold(0)};
  for (int step = 0; step < kThresholdSteps; ++step) {
    const double threshold = sweep_threshold(step);
    std::size_t correct = 0;
    for (const auto& p : pairs) {
      const int predicted = p.score > threshold ? 1 : 0;
      correct += predicted == p.label ? 1 : 0;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
    if (accuracy > best.best_accuracy) best = {accuracy, threshold};
  }
  return best;
}

double precision_at_k(std::span<const ExerciseId> ranked, const std::unordered_set<ExerciseId>& relevant,
                      std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (ranked.empty()) throw Error(ErrorCode::EmptyRanking, "precision of an empty ranking");
  const std::size_t top = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += relevant.count(ranked[i]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::string report_to_json(const EvalReport& report) {
  const json obj = {{"auc", report.auc ? json(*report.auc) : json(nullptr)},
                    {"best_accuracy", report.best_accuracy},
                    {"best_threshold", report.best_threshold},
                    {"precision_at_k", report.precision_at_k ? json(*report.precision_at_k) : json(nullptr)},
                    {"k", report.k ? json(*report.k) : json(nullptr)},
                    {"n_pairs", report.n_pairs},
                    {"n_queries", report.n_queries},
                    {"side", std::string(to_string(report.side))}};
  return obj.dump(2);
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << report_to_json(report) << '\n';
}

namespace {

std::optional<double> pooled_auc(std::span<const ScoredPair> pairs) {
  try {
    return auc(pairs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateLabels) throw;
    spdlog::warn("AUC undefined: {}", e.detail());
    return std::nullopt;
  }
}

}  // namespace

EvalReport eval_judgments(const JudgmentSet& judgments, const VectorIndex& index, const Scorer& scorer) {
  validate(judgments);
  std::unordered_map<std::string, std::vector<double>> scores_by_query;
  const auto queries = judgments.queries();
  for (const Query& q : queries) scores_by_query.emplace(q.id, scorer(q));

  std::vector<ScoredPair> pairs;
  pairs.reserve(judgments.records.size());
  for (const Judgment& j : judgments.records) {
    const auto& scores = scores_by_query.at(j.query_id);
    pairs.push_back({j.query_id, j.exercise_id, scores.at(index.position(j.exercise_id)), j.label});
  }

  EvalReport report;
  report.side = index.spec().side;
  report.n_pairs = pairs.size();
  report.n_queries = queries.size();
  if (pairs.empty()) return report;
  report.auc = pooled_auc(pairs);
  const SweepResult sweep = accuracy_sweep(pairs);
  report.best_accuracy = sweep.best_accuracy;
  report.best_threshold = sweep.best_threshold;
  return report;
}

EvalReport eval_tags(const TagBenchmark& bench, const VectorIndex& index, const Scorer& scorer, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  std::vector<ScoredPair> pairs;
  pairs.reserve(bench.tags.size() * index.size());
  double precision_sum = 0.0;

  for (const TagEntry& tag : bench.tags) {
    const std::unordered_set<ExerciseId> relevant(tag.relevant_ids.begin(), tag.relevant_ids.end());
    for (ExerciseId id : relevant) index.position(id);
    const auto scores = scorer(Query{tag.tag_id, tag.tag_text, "l1"});
    if (scores.size() != index.size()) {
      throw Error(ErrorCode::DimMismatch, "scorer returned " + std::to_string(scores.size()) + " scores for " +
                                              std::to_string(index.size()) + " exercises");
    }
    const auto ranked = top_k(index.ids(), scores, static_cast<std::size_t>(k));
    std::vector<ExerciseId> ranked_ids;
    ranked_ids.reserve(ranked.size());
    for (const auto& r : ranked) ranked_ids.push_back(r.id);
    precision_sum += precision_at_k(ranked_ids, relevant, static_cast<std::size_t>(k));

    for (std::size_t i = 0; i < index.size(); ++i) {
      const ExerciseId id = index.ids()[i];
      pairs.push_back({tag.tag_id, id, scores[i], relevant.count(id) ? 1 : 0});
    }
  }

  EvalReport report;
  report.side = index.spec().side;
  report.k = k;
  report.n_queries = bench.tags.size();
  report.n_pairs = pairs.size();
  if (bench.tags.empty()) return report;
  report.precision_at_k = precision_sum / static_cast<double>(bench.tags.size());
  report.auc = pooled_auc(pairs);
  const SweepResult sweep = accuracy_sweep(pairs);
  report.best_accuracy = sweep.best_accuracy;
  report.best_threshold = sweep.best_threshold;
  return report;
}

std::vector<ExerciseId> TierSample::all() const {
  std::vector<ExerciseId> out(tier1);
  out.insert(out.end(), tier2.begin(), tier2.end());
  out.insert(out.end(), tier3.begin(), tier3.end());
  return out;
}

namespace {

// Partial Fisher-Yates over ranking[lo, hi): the first `count` picks.
std::vector<ExerciseId> draw_without_replacement(std::span<const ExerciseId> ranking, std::size_t lo, std::size_t hi,
                                                 std::size_t count, std::mt19937_64& rng) {
  std::vector<ExerciseId> pool(ranking.begin() + static_cast<std::ptrdiff_t>(lo),
                               ranking.begin() + static_cast<std::ptrdiff_t>(hi));
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

TierSample tier_sample(std::span<const ExerciseId> ranking, std::uint64_t seed) {
  if (ranking.size() < kTierPoolSize) {
    throw Error(ErrorCode::RankingTooShort,
                std::to_string(ranking.size()) + " < " + std::to_string(kTierPoolSize));
  }
  const std::unordered_set<ExerciseId> distinct(ranking.begin(), ranking.begin() + kTierPoolSize);
  if (distinct.size() != kTierPoolSize) throw Error(ErrorCode::InvalidArgument, "ranking ids are not distinct");

  std::mt19937_64 rng(seed);
  TierSample sample;
  sample.seed = seed;
  sample.tier1.assign(ranking.begin(), ranking.begin() + kTierTopSize);
  sample.tier2 = draw_without_replacement(ranking, kTierTopSize, kTierMidEnd, kTierDrawSize, rng);
  sample.tier3 = draw_without_replacement(ranking, kTierMidEnd, kTierPoolSize, kTierDrawSize, rng);
  return sample;
}

std::size_t char_count(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

namespace {

LengthSeries make_series(std::string name, std::vector<std::size_t> lengths) {
  LengthSeries s;
  s.name = std::move(name);
  s.lengths = std::move(lengths);
  double total = 0.0;
  for (std::size_t len : s.lengths) {
    total += static_cast<double>(len);
    ++s.buckets[len / kLengthBucketWidth * kLengthBucketWidth];
  }
  s.mean = s.lengths.empty() ? 0.0 : total / static_cast<double>(s.lengths.size());
  return s;
}

}  // namespace

LengthReport length_analysis(const std::vector<std::pair<std::string, std::vector<RetrievalResult>>>& runs,
                             const Corpus& corpus, std::size_t top_m) {
  LengthReport report;
  std::optional<Side> side;
  for (const auto& [name, results] : runs) {
    std::vector<std::size_t> lengths;
    for (const RetrievalResult& r : results) {
      if (!side) side = r.side;
      const std::size_t m = std::min(top_m, r.ranked.size());
      for (std::size_t i = 0; i < m; ++i) lengths.push_back(char_count(corpus.at(r.ranked[i].id).text(r.side)));
    }
    report.series.push_back(make_series(name, std::move(lengths)));
  }
  std::vector<std::size_t> corpus_lengths;
  corpus_lengths.reserve(corpus.size());
  for (const Exercise& ex : corpus) corpus_lengths.push_back(char_count(ex.text(side.value_or(Side::L2))));
  report.series.push_back(make_series("corpus", std::move(corpus_lengths)));
  return report;
}

void save_length_histogram(const LengthReport& report, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const LengthSeries& s : report.series) {
    for (const auto& [lo, count] : s.buckets) {
      out << json{{"series", s.name}, {"bucket_lo", lo}, {"count", count}}.dump() << '\n';
    }
  }
}

void save_projection(const PcaResult& result, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const ProjectedPoint& p : result.points) {
    const double x = p.coords.empty() ? 0.0 : p.coords[0];
    const double y = p.coords.size() < 2 ? 0.0 : p.coords[1];
    out << json{{"group", p.group}, {"x", x}, {"y", y}}.dump() << '\n';
  }
}

}  // namespace hyex
