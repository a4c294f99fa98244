#pragma once

// Deterministic fixtures shared by unit and acceptance tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hyex/align.hpp"
#include "hyex/core.hpp"
#include "hyex/generate.hpp"

namespace hyex::testing {

inline constexpr std::size_t kPlantedDim = 512;

struct PlantedTopic {
  std::string query;               // English meta-language, e.g. "past tense"
  std::vector<std::string> words;  // Spanish content vocabulary
};

const std::vector<PlantedTopic>& planted_topics();

struct PlantedOptions {
  std::size_t sentences_per_topic = 55;
  std::size_t candidates_per_rule = 12;
  /// Adds three short sentences per topic built from the query's own words
  /// (e.g. "Past tense.") so direct search has something near the query.
  bool short_decoys = false;
  std::uint64_t seed = 2024;
};

struct PlantedFixture {
  Corpus corpus;
  TagBenchmark bench;               // one tag per topic; relevant = topic sentences
  std::vector<MockRule> rules;      // query -> hypothetical sentences in topic vocabulary
  std::vector<Query> queries;
  std::vector<std::vector<ExerciseId>> topic_ids;  // per topic
  std::vector<ExerciseId> decoy_ids;
};

/// Topic sentences hold 4 distinct words of one topic; ids interleave topics
/// (id = row * n_topics + topic) so ascending-id tie breaking favors none.
PlantedFixture make_planted_fixture(const PlantedOptions& options = {});

/// Row-major Gaussian matrix from a seeded engine.
Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

/// Orthogonal matrix from the QR factorization of a seeded Gaussian matrix.
Eigen::MatrixXd random_orthogonal(Eigen::Index dim, std::mt19937_64& rng);

/// Direct scalar evaluation of the contrastive loss: per-pair cosines, plain
/// exp/log, no stabilization. Independent of the library's matrix path.
double naive_infonce_loss(const PairBatch& batch, const ProjectionHead& head, double tau);

struct FiniteDifferenceCheck {
  double max_relative_error = 0.0;
  std::size_t entries = 0;
};

/// Central differences of naive_infonce_loss w.r.t. every head entry, compared with
/// `analytic` as |g - g_fd| / max(1, |g_fd|).
FiniteDifferenceCheck check_gradient_fd(const PairBatch& batch, const ProjectionHead& head, double tau,
                                        const HeadGradient& analytic, double step = 1e-4);

/// Fraction of rows whose nearest L2 row (cosine through the head) is itself.
double translation_accuracy(const PairBatch& pairs, const ProjectionHead& head);

}  // namespace hyex::testing
