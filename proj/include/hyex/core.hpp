#pragma once

// Domain types shared by every module, plus the JSON Lines corpus and
// benchmark formats.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hyex {

using ExerciseId = std::int64_t;
using Vector = std::vector<double>;

enum class Side { L1, L2 };

std::string_view to_string(Side side);
/// Accepts "l1"/"l2" (case-insensitive). Throws InvalidArgument otherwise.
Side parse_side(std::string_view text);

struct Exercise {
  ExerciseId id = 0;
  std::string l1_text;
  std::string l2_text;
  std::optional<std::string> course;

  const std::string& text(Side side) const { return side == Side::L1 ? l1_text : l2_text; }

  friend bool operator==(const Exercise&, const Exercise&) = default;
};

struct Query {
  std::string id;
  std::string text;
  std::string language = "l1";

  friend bool operator==(const Query&, const Query&) = default;
};

/// Ordered, validated exercise pool. Immutable once constructed.
class Corpus {
 public:
  Corpus() = default;
  /// Validates unique ids and non-blank texts.
  explicit Corpus(std::vector<Exercise> exercises);

  std::size_t size() const { return exercises_.size(); }
  bool empty() const { return exercises_.empty(); }
  const std::vector<Exercise>& exercises() const { return exercises_; }
  const Exercise& operator[](std::size_t i) const { return exercises_[i]; }

  bool contains(ExerciseId id) const { return by_id_.count(id) != 0; }
  /// Throws UnknownExercise.
  const Exercise& at(ExerciseId id) const;

  auto begin() const { return exercises_.begin(); }
  auto end() const { return exercises_.end(); }

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.exercises_ == b.exercises_; }

 private:
  std::vector<Exercise> exercises_;
  std::unordered_map<ExerciseId, std::size_t> by_id_;
};

struct Judgment {
  std::string query_id;
  std::string query_text;
  ExerciseId exercise_id = 0;
  int label = 0;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

/// Labeled (query, exercise) pairs. Pairs are unique.
struct JudgmentSet {
  std::vector<Judgment> records;

  /// Distinct queries in first-appearance order.
  std::vector<Query> queries() const;
};

struct TagEntry {
  std::string tag_id;
  std::string tag_text;
  std::vector<ExerciseId> relevant_ids;  // sorted ascending, non-empty

  friend bool operator==(const TagEntry&, const TagEntry&) = default;
};

struct TagBenchmark {
  std::vector<TagEntry> tags;
};

bool is_blank(std::string_view text);

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// When `corpus` is given every exercise id must resolve in it.
JudgmentSet load_judgments(const std::filesystem::path& path, const Corpus* corpus = nullptr);
void save_judgments(const JudgmentSet& judgments, const std::filesystem::path& path);

TagBenchmark load_tag_benchmark(const std::filesystem::path& path, const Corpus* corpus = nullptr);
void save_tag_benchmark(const TagBenchmark& bench, const std::filesystem::path& path);

/// Checks judgment invariants (unique pairs, labels in {0,1}, ids resolve).
void validate(const JudgmentSet& judgments, const Corpus* corpus = nullptr);
void validate(const TagBenchmark& bench, const Corpus* corpus = nullptr);

}  // namespace hyex
