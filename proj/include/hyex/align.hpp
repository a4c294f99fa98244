#pragma once

// Contrastive alignment of bilingual embeddings: a linear projection head
// trained with the in-batch InfoNCE loss over cosine similarities.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hyex/core.hpp"
#include "hyex/embed.hpp"

namespace hyex {

inline constexpr double kDefaultTemperature = 0.05;

/// ⟨a,b⟩ / (‖a‖‖b‖), clamped to [-1, 1]. Throws ZeroNorm.
double cosine_sim(std::span<const double> a, std::span<const double> b);

enum class Optimizer { Adam, GradientDescent };

struct TrainConfig {
  double tau = kDefaultTemperature;
  std::size_t batch_size = 64;
  int epochs = 10;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;
  double init_noise = 0.01;
  bool tied = true;
  /// 0 keeps the input dimension.
  std::size_t dim_out = 0;

  void validate() const;
};

struct TrainMeta {
  TrainConfig config;
  std::size_t n_pairs = 0;
  std::vector<double> loss_trace;
};

/// Linear maps applied to base embeddings, one per side or one shared.
/// Matrices are dim_out × dim_in; `w_l2` is empty when tied.
struct ProjectionHead {
  Eigen::MatrixXd w_l1;
  Eigen::MatrixXd w_l2;
  bool tied = true;
  double tau = kDefaultTemperature;
  std::optional<TrainMeta> train_meta;

  static ProjectionHead identity(std::size_t dim, bool tied);

  std::size_t dim_in() const { return static_cast<std::size_t>(w_l1.cols()); }
  std::size_t dim_out() const { return static_cast<std::size_t>(w_l1.rows()); }
  const Eigen::MatrixXd& weights(Side side) const { return tied || side == Side::L1 ? w_l1 : w_l2; }

  /// Hex FNV-1a digest of shape, mode and matrix contents.
  std::string projection_id() const;
  /// Shapes consistent and all entries finite; throws InvalidArgument/NonFinite.
  void validate() const;
};

/// Row i of `l1` and row i of `l2` are the two sides of one exercise.
struct PairBatch {
  Eigen::MatrixXd l1;
  Eigen::MatrixXd l2;

  std::size_t size() const { return static_cast<std::size_t>(l1.rows()); }
  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd similarity;  // S(i,j) = cos(W_l1 e1_i, W_l2 e2_j)
};

struct HeadGradient {
  Eigen::MatrixXd w_l1;
  Eigen::MatrixXd w_l2;  // empty when tied; w_l1 then holds the summed gradient
};

/// Mean over the batch of -log softmax_j(S(i,j)/τ) evaluated at j = i. The
/// denominator runs over every in-batch L2 row including the positive.
LossResult infonce_loss(const PairBatch& batch, const ProjectionHead& head, double tau);

/// Exact gradient of infonce_loss with respect to the head matrices.
HeadGradient infonce_grad(const PairBatch& batch, const ProjectionHead& head, double tau);

/// Loss and gradient from one forward pass.
std::pair<LossResult, HeadGradient> infonce_loss_and_grad(const PairBatch& batch, const ProjectionHead& head,
                                                          double tau);

struct TrainResult {
  ProjectionHead head;
  std::vector<double> loss_trace;  // mean batch loss per epoch
};

/// Identity + N(0, init_noise²) initialization, seeded shuffles per epoch,
/// full batches only (the trailing partial batch is dropped; the batch size is
/// capped at the pair count). Deterministic for a given seed.
TrainResult train(const PairBatch& pairs, const TrainConfig& config);

/// Pairs the two stores by id (l1 order) and trains. Both stores must hold the
/// same id set and dimension.
TrainResult train(const EmbeddingStore& l1, const EmbeddingStore& l2, const TrainConfig& config);

Vector project(const ProjectionHead& head, Side side, std::span<const double> v);

/// Maps every vector through the side's matrix; spec.projection_id is set.
EmbeddingStore apply_head(const EmbeddingStore& store, const ProjectionHead& head, Side side);

void save_head(const ProjectionHead& head, const std::filesystem::path& path);
ProjectionHead load_head(const std::filesystem::path& path);

}  // namespace hyex
