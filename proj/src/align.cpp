#include "hyex/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "hyex/error.hpp"
#include "jsonl.hpp"

namespace hyex {

using detail::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroNorm, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void TrainConfig::validate() const {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be > 0");
  if (!(init_noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "init_noise must be >= 0");
}

ProjectionHead ProjectionHead::identity(std::size_t dim, bool tied) {
  ProjectionHead head;
  const auto d = static_cast<Eigen::Index>(dim);
  head.w_l1 = MatrixXd::Identity(d, d);
  if (!tied) head.w_l2 = MatrixXd::Identity(d, d);
  head.tied = tied;
  return head;
}

void ProjectionHead::validate() const {
  if (w_l1.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty projection head");
  if (!tied && (w_l2.rows() != w_l1.rows() || w_l2.cols() != w_l1.cols())) {
    throw Error(ErrorCode::InvalidArgument, "untied head matrices differ in shape");
  }
  if (!w_l1.allFinite() || (!tied && !w_l2.allFinite())) {
    throw Error(ErrorCode::NonFinite, "projection head has non-finite entries");
  }
}

namespace {

void hash_matrix(std::uint64_t& h, const MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double x = m(r, c);
      const auto* bytes = reinterpret_cast<const unsigned char*>(&x);
      for (std::size_t k = 0; k < sizeof(double); ++k) {
        h ^= bytes[k];
        h *= 0x100000001b3ULL;
      }
    }
  }
}

}  // namespace

std::string ProjectionHead::projection_id() const {
  std::uint64_t h = fnv1a64(std::to_string(dim_out()) + "x" + std::to_string(dim_in()) + (tied ? "t" : "u"));
  hash_matrix(h, w_l1);
  if (!tied) hash_matrix(h, w_l2);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void PairBatch::validate() const {
  if (l1.rows() != l2.rows()) throw Error(ErrorCode::DimMismatch, "batch sides differ in row count");
  if (l1.rows() == 0) throw Error(ErrorCode::EmptyBatch, "empty pair batch");
  if (!l1.allFinite() || !l2.allFinite()) throw Error(ErrorCode::NonFinite, "pair batch");
  for (Eigen::Index i = 0; i < l1.rows(); ++i) {
    if (l1.row(i).squaredNorm() == 0.0 || l2.row(i).squaredNorm() == 0.0) {
      throw Error(ErrorCode::ZeroNorm, "batch row " + std::to_string(i));
    }
  }
}

namespace {

struct Forward {
  MatrixXd u;        // normalized projected L1 rows
  MatrixXd v;        // normalized projected L2 rows
  VectorXd norm_u;   // pre-normalization norms
  VectorXd norm_v;
  MatrixXd sim;      // u v^T, clamped
  MatrixXd softmax;  // row softmax of sim / tau
  double loss = 0.0;
};

void normalize_rows(const MatrixXd& z, MatrixXd& unit, VectorXd& norms, const char* side) {
  norms = z.rowwise().norm();
  unit.resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!(norms(i) > 0.0) || !std::isfinite(norms(i))) {
      throw Error(ErrorCode::ZeroNorm, std::string("projected ") + side + " row " + std::to_string(i));
    }
    unit.row(i) = z.row(i) / norms(i);
  }
}

Forward forward(const PairBatch& batch, const ProjectionHead& head, double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be > 0");
  batch.validate();
  if (static_cast<std::size_t>(batch.l1.cols()) != head.dim_in() ||
      static_cast<std::size_t>(batch.l2.cols()) != head.dim_in()) {
    throw Error(ErrorCode::DimMismatch, "batch width " + std::to_string(batch.l1.cols()) +
                                            " vs head input " + std::to_string(head.dim_in()));
  }
  Forward f;
  normalize_rows(batch.l1 * head.weights(Side::L1).transpose(), f.u, f.norm_u, "l1");
  normalize_rows(batch.l2 * head.weights(Side::L2).transpose(), f.v, f.norm_v, "l2");
  f.sim = (f.u * f.v.transpose()).cwiseMax(-1.0).cwiseMin(1.0);

  const Eigen::Index n = f.sim.rows();
  f.softmax.resize(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double row_max = f.sim.row(i).maxCoeff() / tau;
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double e = std::exp(f.sim(i, j) / tau - row_max);
      f.softmax(i, j) = e;
      denom += e;
    }
    f.softmax.row(i) /= denom;
    total += -(f.sim(i, i) / tau - row_max) + std::log(denom);
  }
  f.loss = total / static_cast<double>(n);
  return f;
}

// d loss / d z for z = ‖z‖ · unit, given d loss / d unit.
MatrixXd through_normalization(const MatrixXd& d_unit, const MatrixXd& unit, const VectorXd& norms) {
  MatrixXd dz(d_unit.rows(), d_unit.cols());
  for (Eigen::Index i = 0; i < d_unit.rows(); ++i) {
    const double radial = d_unit.row(i).dot(unit.row(i));
    dz.row(i) = (d_unit.row(i) - radial * unit.row(i)) / norms(i);
  }
  return dz;
}

HeadGradient backward(const Forward& f, const PairBatch& batch, const ProjectionHead& head, double tau) {
  const Eigen::Index n = f.sim.rows();
  // d loss / d S(i,j) = (P(i,j) - [i == j]) / (n τ)
  MatrixXd d_sim = f.softmax;
  d_sim.diagonal().array() -= 1.0;
  d_sim /= static_cast<double>(n) * tau;

  const MatrixXd d_u = d_sim * f.v;
  const MatrixXd d_v = d_sim.transpose() * f.u;
  const MatrixXd d_z1 = through_normalization(d_u, f.u, f.norm_u);
  const MatrixXd d_z2 = through_normalization(d_v, f.v, f.norm_v);

  HeadGradient g;
  g.w_l1 = d_z1.transpose() * batch.l1;
  if (head.tied) {
    g.w_l1 += d_z2.transpose() * batch.l2;
  } else {
    g.w_l2 = d_z2.transpose() * batch.l2;
  }
  return g;
}

}  // namespace

LossResult infonce_loss(const PairBatch& batch, const ProjectionHead& head, double tau) {
  Forward f = forward(batch, head, tau);
  return {f.loss, std::move(f.sim)};
}

HeadGradient infonce_grad(const PairBatch& batch, const ProjectionHead& head, double tau) {
  const Forward f = forward(batch, head, tau);
  return backward(f, batch, head, tau);
}

std::pair<LossResult, HeadGradient> infonce_loss_and_grad(const PairBatch& batch, const ProjectionHead& head,
                                                          double tau) {
  Forward f = forward(batch, head, tau);
  HeadGradient g = backward(f, batch, head, tau);
  return {LossResult{f.loss, std::move(f.sim)}, std::move(g)};
}

namespace {

struct AdamState {
  MatrixXd m;
  MatrixXd v;
};

class HeadOptimizer {
 public:
  HeadOptimizer(const TrainConfig& config, const ProjectionHead& head) : config_(config) {
    state_l1_ = {MatrixXd::Zero(head.w_l1.rows(), head.w_l1.cols()), MatrixXd::Zero(head.w_l1.rows(), head.w_l1.cols())};
    if (!head.tied) {
      state_l2_ = {MatrixXd::Zero(head.w_l2.rows(), head.w_l2.cols()), MatrixXd::Zero(head.w_l2.rows(), head.w_l2.cols())};
    }
  }

  void step(ProjectionHead& head, const HeadGradient& grad) {
    ++t_;
    update(head.w_l1, grad.w_l1, state_l1_);
    if (!head.tied) update(head.w_l2, grad.w_l2, state_l2_);
  }

 private:
  void update(MatrixXd& w, const MatrixXd& g, AdamState& s) const {
    if (config_.optimizer == Optimizer::GradientDescent) {
      w -= config_.learning_rate * g;
      return;
    }
    s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * g;
    s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    w.array() -= config_.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + config_.epsilon);
  }

  const TrainConfig& config_;
  AdamState state_l1_;
  AdamState state_l2_;
  long t_ = 0;
};

}  // namespace

TrainResult train(const PairBatch& pairs, const TrainConfig& config) {
  config.validate();
  if (pairs.size() < 2) {
    throw Error(ErrorCode::InsufficientPairs, "need at least 2 pairs, got " + std::to_string(pairs.size()));
  }
  pairs.validate();

  const auto n = static_cast<Eigen::Index>(pairs.size());
  const Eigen::Index d_in = pairs.l1.cols();
  const Eigen::Index d_out = config.dim_out == 0 ? d_in : static_cast<Eigen::Index>(config.dim_out);
  const Eigen::Index batch = std::min<Eigen::Index>(static_cast<Eigen::Index>(config.batch_size), n);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, config.init_noise);
  auto init = [&] {
    MatrixXd w = MatrixXd::Identity(d_out, d_in);
    if (config.init_noise > 0.0) {
      for (Eigen::Index r = 0; r < d_out; ++r)
        for (Eigen::Index c = 0; c < d_in; ++c) w(r, c) += noise(rng);
    }
    return w;
  };
  TrainResult result;
  ProjectionHead& head = result.head;
  head.tied = config.tied;
  head.tau = config.tau;
  head.w_l1 = init();
  if (!config.tied) head.w_l2 = init();

  HeadOptimizer optimizer(config, head);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  PairBatch mb{MatrixXd(batch, d_in), MatrixXd(batch, d_in)};

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    const Eigen::Index n_batches = n / batch;
    for (Eigen::Index b = 0; b < n_batches; ++b) {
      for (Eigen::Index r = 0; r < batch; ++r) {
        const Eigen::Index src = order[static_cast<std::size_t>(b * batch + r)];
        mb.l1.row(r) = pairs.l1.row(src);
        mb.l2.row(r) = pairs.l2.row(src);
      }
      auto [loss, grad] = infonce_loss_and_grad(mb, head, config.tau);
      if (!std::isfinite(loss.loss) || !grad.w_l1.allFinite() || (!head.tied && !grad.w_l2.allFinite())) {
        throw Error(ErrorCode::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      optimizer.step(head, grad);
      epoch_loss += loss.loss;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(n_batches));
    spdlog::debug("epoch {}/{}: mean loss {:.6f}", epoch + 1, config.epochs, result.loss_trace.back());
  }
  head.validate();
  head.train_meta = TrainMeta{config, pairs.size(), result.loss_trace};
  return result;
}

TrainResult train(const EmbeddingStore& l1, const EmbeddingStore& l2, const TrainConfig& config) {
  if (l1.dim() != l2.dim()) {
    throw Error(ErrorCode::DimMismatch, "l1 dim " + std::to_string(l1.dim()) + " vs l2 dim " + std::to_string(l2.dim()));
  }
  if (l1.size() != l2.size()) {
    throw Error(ErrorCode::InvalidArgument, "stores hold different id sets");
  }
  if (l1.size() < 2) {
    throw Error(ErrorCode::InsufficientPairs, "need at least 2 pairs, got " + std::to_string(l1.size()));
  }
  const auto n = static_cast<Eigen::Index>(l1.size());
  const auto d = static_cast<Eigen::Index>(l1.dim());
  PairBatch pairs{MatrixXd(n, d), MatrixXd(n, d)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const ExerciseId id = l1.ids()[static_cast<std::size_t>(i)];
    if (!l2.contains(id)) throw Error(ErrorCode::InvalidArgument, "id " + std::to_string(id) + " missing from l2 store");
    pairs.l1.row(i) = Eigen::Map<const VectorXd>(l1.vectors()[static_cast<std::size_t>(i)].data(), d);
    pairs.l2.row(i) = Eigen::Map<const VectorXd>(l2.at(id).data(), d);
  }
  return train(pairs, config);
}

Vector project(const ProjectionHead& head, Side side, std::span<const double> v) {
  if (v.size() != head.dim_in()) {
    throw Error(ErrorCode::DimMismatch, "vector of " + std::to_string(v.size()) + " vs head input " +
                                            std::to_string(head.dim_in()));
  }
  const VectorXd out = head.weights(side) * Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return Vector(out.data(), out.data() + out.size());
}

EmbeddingStore apply_head(const EmbeddingStore& store, const ProjectionHead& head, Side side) {
  if (store.dim() != head.dim_in()) {
    throw Error(ErrorCode::DimMismatch, "store dim " + std::to_string(store.dim()) + " vs head input " +
                                            std::to_string(head.dim_in()));
  }
  std::vector<Vector> projected;
  projected.reserve(store.size());
  for (const auto& v : store.vectors()) projected.push_back(project(head, side, v));
  EmbeddingSpec spec = store.spec();
  spec.dim = head.dim_out();
  spec.projection_id = head.projection_id();
  return store.with_vectors(std::move(spec), std::move(projected));
}

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

MatrixXd matrix_from_json(const json& rows, std::size_t n_rows, std::size_t n_cols) {
  const auto data = rows.get<std::vector<std::vector<double>>>();
  if (data.size() != n_rows) throw Error(ErrorCode::ParseError, "head matrix has wrong row count");
  MatrixXd m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (data[r].size() != n_cols) throw Error(ErrorCode::ParseError, "head matrix has ragged rows");
    for (std::size_t c = 0; c < n_cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[r][c];
  }
  return m;
}

std::string_view to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

}  // namespace

void save_head(const ProjectionHead& head, const std::filesystem::path& path) {
  head.validate();
  json meta = json::object();
  if (head.train_meta) {
    const TrainConfig& c = head.train_meta->config;
    meta = {{"tau", c.tau},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"optimizer", std::string(to_string(c.optimizer))},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"seed", c.seed},
            {"init_noise", c.init_noise},
            {"n_pairs", head.train_meta->n_pairs},
            {"loss_trace", head.train_meta->loss_trace}};
  }
  const json doc = {{"dim_in", head.dim_in()},
                    {"dim_out", head.dim_out()},
                    {"tied", head.tied},
                    {"tau", head.tau},
                    {"w_l1", matrix_to_json(head.w_l1)},
                    {"w_l2", head.tied ? json(nullptr) : matrix_to_json(head.w_l2)},
                    {"projection_id", head.projection_id()},
                    {"train_meta", meta}};
  auto out = detail::open_output(path);
  out << doc.dump() << '\n';
}

ProjectionHead load_head(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  try {
    ProjectionHead head;
    const auto d_in = doc.at("dim_in").get<std::size_t>();
    const auto d_out = doc.at("dim_out").get<std::size_t>();
    head.tied = doc.at("tied").get<bool>();
    head.tau = doc.value("tau", kDefaultTemperature);
    head.w_l1 = matrix_from_json(doc.at("w_l1"), d_out, d_in);
    if (!head.tied) head.w_l2 = matrix_from_json(doc.at("w_l2"), d_out, d_in);
    if (auto it = doc.find("train_meta"); it != doc.end() && it->is_object() && !it->empty()) {
      TrainMeta meta;
      TrainConfig& c = meta.config;
      c.tau = it->value("tau", c.tau);
      c.batch_size = it->value("batch_size", c.batch_size);
      c.epochs = it->value("epochs", c.epochs);
      c.learning_rate = it->value("learning_rate", c.learning_rate);
      c.optimizer = it->value("optimizer", std::string("adam")) == "gd" ? Optimizer::GradientDescent : Optimizer::Adam;
      c.beta1 = it->value("beta1", c.beta1);
      c.beta2 = it->value("beta2", c.beta2);
      c.epsilon = it->value("epsilon", c.epsilon);
      c.seed = it->value("seed", c.seed);
      c.init_noise = it->value("init_noise", c.init_noise);
      c.tied = head.tied;
      meta.n_pairs = it->value("n_pairs", std::size_t{0});
      meta.loss_trace = it->value("loss_trace", std::vector<double>{});
      head.train_meta = std::move(meta);
    }
    head.validate();
    if (auto it = doc.find("projection_id"); it != doc.end() && it->is_string() &&
                                             it->get<std::string>() != head.projection_id()) {
      throw Error(ErrorCode::ParseError, path.string() + ": projection_id does not match matrix contents");
    }
    return head;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace hyex
