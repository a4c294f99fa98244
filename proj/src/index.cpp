#include "hyex/index.hpp"

#include <algorithm>
#include <cmath>

#include "hyex/error.hpp"

namespace hyex {

std::size_t VectorIndex::position(ExerciseId id) const {
  auto it = position_.find(id);
  if (it == position_.end()) throw Error(ErrorCode::UnknownExercise, std::to_string(id));
  return it->second;
}

VectorIndex build_index(const EmbeddingStore& store) {
  if (!store.sealed()) throw Error(ErrorCode::InvalidArgument, "index requires a sealed store");
  VectorIndex index;
  index.spec_ = store.spec();
  index.ids_ = store.ids();
  index.unit_.reserve(store.size() * store.dim());
  index.position_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Vector& v = store.vectors()[i];
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq == 0.0) throw Error(ErrorCode::ZeroNormVector, "id " + std::to_string(store.ids()[i]));
    const double norm = std::sqrt(norm_sq);
    for (double x : v) index.unit_.push_back(x / norm);
    index.position_.emplace(store.ids()[i], i);
  }
  return index;
}

std::vector<double> score_all(const VectorIndex& index, std::span<const double> query) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "index holds no vectors");
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) + " vs index dim " +
                                            std::to_string(index.dim()));
  }
  double norm_sq = 0.0;
  for (double x : query) norm_sq += x * x;
  if (norm_sq == 0.0 || !std::isfinite(norm_sq)) throw Error(ErrorCode::ZeroNormQuery, "query has zero norm");
  const double norm = std::sqrt(norm_sq);

  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto row = index.row(i);
    double dot = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) dot += row[c] * query[c];
    scores[i] = std::clamp(dot / norm, -1.0, 1.0);
  }
  return scores;
}

std::vector<ScoredId> top_k(std::span<const ExerciseId> ids, std::span<const double> scores, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (ids.size() != scores.size()) throw Error(ErrorCode::DimMismatch, "ids and scores differ in length");
  std::vector<ScoredId> all(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) all[i] = {ids[i], scores[i]};
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), ranks_before);
  all.resize(keep);
  return all;
}

std::vector<ScoredId> search(const VectorIndex& index, std::span<const double> query, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const auto scores = score_all(index, query);
  return top_k(index.ids(), scores, k);
}

}  // namespace hyex
