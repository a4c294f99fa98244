#pragma once

// Exact cosine k-nearest-neighbor search over an embedding store.

#include <span>
#include <unordered_map>
#include <vector>

#include "hyex/core.hpp"
#include "hyex/embed.hpp"

namespace hyex {

struct ScoredId {
  ExerciseId id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

/// Ranking order: higher score first, ties by ascending id.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
  return a.score != b.score ? a.score > b.score : a.id < b.id;
}

/// Row-normalized copy of a sealed store. Rows are kept in one contiguous
/// n×d buffer of doubles (n·d·8 bytes; about 550 MB for 89,392 × 768).
class VectorIndex {
 public:
  VectorIndex() = default;

  const EmbeddingSpec& spec() const { return spec_; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return spec_.dim; }
  const std::vector<ExerciseId>& ids() const { return ids_; }
  std::span<const double> row(std::size_t i) const { return {unit_.data() + i * dim(), dim()}; }
  /// Position of `id` in ids(); throws UnknownExercise.
  std::size_t position(ExerciseId id) const;

 private:
  friend VectorIndex build_index(const EmbeddingStore& store);

  EmbeddingSpec spec_;
  std::vector<ExerciseId> ids_;
  std::vector<double> unit_;
  std::unordered_map<ExerciseId, std::size_t> position_;
};

/// Throws ZeroNormVector naming the first zero vector, InvalidArgument if the
/// store is not sealed.
VectorIndex build_index(const EmbeddingStore& store);

/// Cosine of `query` against every row, in ids() order. Accumulation is
/// sequential over components.
std::vector<double> score_all(const VectorIndex& index, std::span<const double> query);

/// Top-min(k, n) rows by score_all under ranks_before.
std::vector<ScoredId> search(const VectorIndex& index, std::span<const double> query, std::size_t k);

/// Top-min(k, n) of an arbitrary score vector aligned with `ids`.
std::vector<ScoredId> top_k(std::span<const ExerciseId> ids, std::span<const double> scores, std::size_t k);

}  // namespace hyex
