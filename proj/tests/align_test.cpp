#include "hyex/align.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "test_util.hpp"

namespace hyex {
namespace {

using testing::gaussian_matrix;
using testing::TempDir;

PairBatch random_batch(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  return {gaussian_matrix(n, d, rng), gaussian_matrix(n, d, rng)};
}

ProjectionHead random_head(std::mt19937_64& rng, Eigen::Index d_out, Eigen::Index d, bool tied) {
  ProjectionHead head;
  head.tied = tied;
  head.w_l1 = Eigen::MatrixXd::Identity(d_out, d) + 0.3 * gaussian_matrix(d_out, d, rng);
  if (!tied) head.w_l2 = Eigen::MatrixXd::Identity(d_out, d) + 0.3 * gaussian_matrix(d_out, d, rng);
  return head;
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_sim(Vector{1, 0}, Vector{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_sim(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_NEAR(cosine_sim(Vector{3, 4}, Vector{4, 3}), 0.96, 1e-15);
  EXPECT_HYEX_ERROR(cosine_sim(Vector{0, 0}, Vector{1, 0}), ErrorCode::ZeroNorm);
  EXPECT_HYEX_ERROR(cosine_sim(Vector{1, 0, 0}, Vector{1, 0}), ErrorCode::DimMismatch);
}

TEST(Cosine, StaysInRange) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Eigen::MatrixXd v = gaussian_matrix(1, 7, rng);
    const Vector a(v.data(), v.data() + 7);
    Vector b = a;
    for (double& x : b) x *= 3.7;
    const double c = cosine_sim(a, b);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(c, 1.0, 1e-12);
  }
}

TEST(InfoNce, SinglePairHasZeroLossAndGradient) {
  std::mt19937_64 rng(1);
  const PairBatch batch = random_batch(rng, 1, 6);
  for (bool tied : {true, false}) {
    const ProjectionHead head = random_head(rng, 6, 6, tied);
    EXPECT_NEAR(infonce_loss(batch, head, 0.05).loss, 0.0, 1e-12);
    const HeadGradient g = infonce_grad(batch, head, 0.05);
    EXPECT_LE(g.w_l1.cwiseAbs().maxCoeff(), 1e-12);
    if (!tied) EXPECT_LE(g.w_l2.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(InfoNce, IdenticalRowsGiveLogN) {
  Eigen::MatrixXd rows(4, 3);
  rows.rowwise() = Eigen::RowVector3d(0.2, -1.0, 0.7);
  const PairBatch batch{rows, rows};
  for (double tau : {0.05, 0.5, 1.0, 3.0}) {
    EXPECT_NEAR(infonce_loss(batch, ProjectionHead::identity(3, true), tau).loss, std::log(4.0), 1e-9);
  }
}

TEST(InfoNce, TwoByTwoIdentity) {
  const PairBatch batch{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
  const LossResult r = infonce_loss(batch, ProjectionHead::identity(2, true), 1.0);
  EXPECT_NEAR(r.loss, -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-15);
  EXPECT_NEAR(r.loss, 0.31326168751822286, 1e-12);
  EXPECT_EQ(r.similarity, Eigen::MatrixXd::Identity(2, 2));
}

TEST(InfoNce, MatchesNaiveFormula) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 20; ++t) {
    const PairBatch batch = random_batch(rng, 6, 5);
    const ProjectionHead head = random_head(rng, 5, 5, t % 2 == 0);
    // Large tau keeps the naive, unstabilized evaluation accurate.
    EXPECT_NEAR(infonce_loss(batch, head, 0.5).loss, testing::naive_infonce_loss(batch, head, 0.5), 1e-12);
  }
}

TEST(InfoNce, StableAtSmallTemperature) {
  std::mt19937_64 rng(23);
  const PairBatch batch = random_batch(rng, 8, 8);
  const LossResult r = infonce_loss(batch, ProjectionHead::identity(8, true), 1e-4);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(InfoNce, DiagonalDominanceImpliesNonNegative) {
  std::mt19937_64 rng(29);
  const Eigen::MatrixXd base = gaussian_matrix(5, 8, rng);
  const PairBatch batch{base, base};
  const LossResult r = infonce_loss(batch, ProjectionHead::identity(8, true), 0.1);
  EXPECT_GE(r.loss, 0.0);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(InfoNce, PermutationInvariance) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const PairBatch batch = random_batch(rng, 7, 6);
    const ProjectionHead head = random_head(rng, 6, 6, false);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PairBatch permuted{batch.l1, batch.l2};
    for (int i = 0; i < 7; ++i) {
      permuted.l1.row(i) = batch.l1.row(perm[i]);
      permuted.l2.row(i) = batch.l2.row(perm[i]);
    }
    EXPECT_NEAR(infonce_loss(batch, head, 0.05).loss, infonce_loss(permuted, head, 0.05).loss, 1e-12);
  }
}

TEST(InfoNce, ScaleInvariance) {
  std::mt19937_64 rng(37);
  const PairBatch batch = random_batch(rng, 6, 6);
  const ProjectionHead head = random_head(rng, 6, 6, false);
  const double base = infonce_loss(batch, head, 0.05).loss;
  for (double c : {0.001, 0.5, 2.0, 1000.0}) {
    ProjectionHead s1 = head;
    s1.w_l1 *= c;
    ProjectionHead s2 = head;
    s2.w_l2 *= c;
    EXPECT_NEAR(infonce_loss(batch, s1, 0.05).loss, base, 5e-12);
    EXPECT_NEAR(infonce_loss(batch, s2, 0.05).loss, base, 5e-12);
  }
}

TEST(InfoNce, ZeroNormRowFails) {
  PairBatch batch{Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
  ProjectionHead head = ProjectionHead::identity(2, true);
  head.w_l1(0, 0) = 0.0;  // collapses e_1 = [1, 0]
  EXPECT_HYEX_ERROR(infonce_loss(batch, head, 1.0), ErrorCode::ZeroNorm);
}

TEST(InfoNceGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  const double taus[] = {0.05, 0.5, 1.0};
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 7);
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 15);
    const Eigen::Index d_out = 2 + static_cast<Eigen::Index>(rng() % 15);
    const double tau = taus[t % 3];
    const PairBatch batch = random_batch(rng, n, d);
    const ProjectionHead head = random_head(rng, d_out, d, t % 2 == 1);
    const auto check = testing::check_gradient_fd(batch, head, tau, infonce_grad(batch, head, tau));
    EXPECT_LT(check.max_relative_error, 1e-4) << "trial " << t << " n=" << n << " d=" << d << " tau=" << tau;
  }
}

TEST(InfoNceGrad, SquareFourByEight) {
  std::mt19937_64 rng(43);
  const PairBatch batch = random_batch(rng, 4, 8);
  const ProjectionHead head = random_head(rng, 8, 8, false);
  const auto check = testing::check_gradient_fd(batch, head, 0.05, infonce_grad(batch, head, 0.05));
  EXPECT_EQ(check.entries, 128u);
  EXPECT_LT(check.max_relative_error, 1e-4);
}

TEST(InfoNceGrad, TiedIsSumOfUntied) {
  std::mt19937_64 rng(47);
  const PairBatch batch = random_batch(rng, 5, 6);
  ProjectionHead tied = random_head(rng, 6, 6, true);
  ProjectionHead untied = tied;
  untied.tied = false;
  untied.w_l2 = tied.w_l1;
  const HeadGradient gt = infonce_grad(batch, tied, 0.05);
  const HeadGradient gu = infonce_grad(batch, untied, 0.05);
  EXPECT_EQ(gt.w_l2.size(), 0);
  EXPECT_LE((gt.w_l1 - (gu.w_l1 + gu.w_l2)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(InfoNceGrad, CombinedCallAgrees) {
  std::mt19937_64 rng(53);
  const PairBatch batch = random_batch(rng, 5, 4);
  const ProjectionHead head = random_head(rng, 4, 4, false);
  const auto [loss, grad] = infonce_loss_and_grad(batch, head, 0.2);
  EXPECT_EQ(loss.loss, infonce_loss(batch, head, 0.2).loss);
  EXPECT_EQ(grad.w_l1, infonce_grad(batch, head, 0.2).w_l1);
}

TEST(TrainConfig, Defaults) {
  const TrainConfig config;
  EXPECT_DOUBLE_EQ(config.tau, 0.05);
  EXPECT_EQ(config.batch_size, 64u);
  EXPECT_EQ(config.epochs, 10);
  EXPECT_DOUBLE_EQ(config.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(config.beta1, 0.9);
  EXPECT_DOUBLE_EQ(config.beta2, 0.999);
  EXPECT_DOUBLE_EQ(config.epsilon, 1e-8);
  EXPECT_DOUBLE_EQ(config.init_noise, 0.01);
  TrainConfig bad;
  bad.tau = 0.0;
  EXPECT_HYEX_ERROR(bad.validate(), ErrorCode::InvalidArgument);
  bad = TrainConfig{};
  bad.batch_size = 0;
  EXPECT_HYEX_ERROR(bad.validate(), ErrorCode::InvalidArgument);
}

PairBatch rotated_pairs(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd l1 = gaussian_matrix(n, d, rng);
  const Eigen::MatrixXd r = testing::random_orthogonal(d, rng);
  return {l1, l1 * r.transpose()};
}

TEST(Train, RecoversRotation) {
  const PairBatch pairs = rotated_pairs(99, 512, 16);
  EXPECT_LE(testing::translation_accuracy(pairs, ProjectionHead::identity(16, false)), 0.05);
  TrainConfig config;
  config.tied = false;
  config.epochs = 30;
  config.learning_rate = 1e-2;
  config.seed = 99;
  const TrainResult result = train(pairs, config);
  EXPECT_GE(testing::translation_accuracy(pairs, result.head), 0.95);
  ASSERT_EQ(result.loss_trace.size(), 30u);
  EXPECT_LT(result.loss_trace.back(), result.loss_trace.front());
}

TEST(Train, DeterministicGivenSeed) {
  const PairBatch pairs = rotated_pairs(5, 96, 8);
  TrainConfig config;
  config.seed = 7;
  config.epochs = 3;
  config.batch_size = 16;
  const TrainResult a = train(pairs, config);
  const TrainResult b = train(pairs, config);
  EXPECT_EQ(a.head.w_l1, b.head.w_l1);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_EQ(a.head.projection_id(), b.head.projection_id());
  config.seed = 8;
  EXPECT_NE(train(pairs, config).head.w_l1, a.head.w_l1);
}

TEST(Train, GradientDescentAlsoLowersLoss) {
  const PairBatch pairs = rotated_pairs(6, 128, 8);
  TrainConfig config;
  config.optimizer = Optimizer::GradientDescent;
  config.learning_rate = 0.05;
  config.batch_size = 32;
  config.tied = false;
  const TrainResult result = train(pairs, config);
  EXPECT_LT(result.loss_trace.back(), result.loss_trace.front());
}

TEST(Train, InsufficientPairs) {
  const PairBatch one{Eigen::MatrixXd::Identity(1, 3), Eigen::MatrixXd::Identity(1, 3)};
  EXPECT_HYEX_ERROR(train(one, TrainConfig{}), ErrorCode::InsufficientPairs);
}

TEST(Train, PairsStoresById) {
  EmbeddingStore l1({3, "mock", Side::L1, std::nullopt});
  EmbeddingStore l2({3, "mock", Side::L2, std::nullopt});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 8; ++i) l1.add(i, {g(rng), g(rng), g(rng)});
  for (int i = 7; i >= 0; --i) l2.add(i, {g(rng), g(rng), g(rng)});
  TrainConfig config;
  config.epochs = 2;
  config.batch_size = 4;
  EXPECT_EQ(train(l1, l2, config).loss_trace.size(), 2u);

  EmbeddingStore other({3, "mock", Side::L2, std::nullopt});
  for (int i = 0; i < 8; ++i) other.add(i + 100, {1, 2, 3});
  EXPECT_THROW(train(l1, other, config), Error);
}

TEST(ApplyHead, IdentityPreservesVectors) {
  std::mt19937_64 rng(61);
  EmbeddingStore store({5, "mock", Side::L2, std::nullopt});
  for (int i = 0; i < 10; ++i) {
    const Eigen::MatrixXd v = gaussian_matrix(1, 5, rng);
    store.add(i, Vector(v.data(), v.data() + 5));
  }
  store.seal();
  const ProjectionHead head = ProjectionHead::identity(5, true);
  const EmbeddingStore out = apply_head(store, head, Side::L2);
  EXPECT_EQ(out.vectors(), store.vectors());
  EXPECT_EQ(out.spec().projection_id, head.projection_id());

  ProjectionHead doubled = head;
  doubled.w_l1 *= 2.0;
  const EmbeddingStore scaled = apply_head(store, doubled, Side::L2);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      EXPECT_NEAR(cosine_sim(scaled.vectors()[i], scaled.vectors()[j]),
                  cosine_sim(store.vectors()[i], store.vectors()[j]), 1e-12);
    }
  }
  EXPECT_HYEX_ERROR(apply_head(store, ProjectionHead::identity(4, true), Side::L2), ErrorCode::DimMismatch);
}

TEST(ApplyHead, ZeroNoiseInitKeepsCosines) {
  const PairBatch pairs = rotated_pairs(3, 8, 4);
  TrainConfig config;
  config.init_noise = 0.0;
  config.epochs = 1;
  config.learning_rate = 1e-12;
  const TrainResult r = train(pairs, config);
  EmbeddingStore store({4, "mock", Side::L1, std::nullopt});
  for (int i = 0; i < 8; ++i) {
    const Eigen::RowVectorXd row = pairs.l1.row(i);
    store.add(i, Vector(row.data(), row.data() + 4));
  }
  const EmbeddingStore out = apply_head(store, r.head, Side::L1);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      EXPECT_NEAR(cosine_sim(out.vectors()[i], out.vectors()[j]), cosine_sim(store.vectors()[i], store.vectors()[j]),
                  1e-8);
    }
  }
}

TEST(Head, SaveLoadRoundTrip) {
  std::mt19937_64 rng(67);
  const PairBatch pairs = rotated_pairs(4, 32, 6);
  TrainConfig config;
  config.tied = false;
  config.epochs = 2;
  config.batch_size = 8;
  const TrainResult r = train(pairs, config);
  TempDir dir;
  save_head(r.head, dir / "head.json");
  const ProjectionHead loaded = load_head(dir / "head.json");
  EXPECT_EQ(loaded.w_l1, r.head.w_l1);
  EXPECT_EQ(loaded.w_l2, r.head.w_l2);
  EXPECT_EQ(loaded.tied, false);
  EXPECT_EQ(loaded.projection_id(), r.head.projection_id());
  ASSERT_TRUE(loaded.train_meta.has_value());
  EXPECT_EQ(loaded.train_meta->loss_trace, r.loss_trace);

  std::string text = testing::read_file(dir / "head.json");
  const auto pos = text.find("\"projection_id\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(text.find('"', pos + 16) + 1, 4, "ffff");
  testing::write_file(dir / "tampered.json", text);
  EXPECT_THROW(load_head(dir / "tampered.json"), Error);
}

}  // namespace
}  // namespace hyex
