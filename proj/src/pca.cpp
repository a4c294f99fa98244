#include <cmath>

#include <Eigen/Dense>

#include "hyex/error.hpp"
#include "hyex/evalx.hpp"

namespace hyex {

namespace {

constexpr int kMaxPowerIterations = 100;
constexpr double kEigenTolerance = 1e-10;

void orthogonalize(Eigen::VectorXd& v, const std::vector<Eigen::VectorXd>& basis) {
  for (const auto& b : basis) v -= v.dot(b) * b;
}

// Unit vector orthogonal to `basis`, taken from the standard basis.
Eigen::VectorXd any_orthogonal(Eigen::Index dim, const std::vector<Eigen::VectorXd>& basis) {
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(dim, i);
    orthogonalize(e, basis);
    orthogonalize(e, basis);
    if (e.norm() > 1e-6) return e.normalized();
  }
  throw Error(ErrorCode::DegenerateData, "no orthogonal direction left");
}

void fix_sign(Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

}  // namespace

PcaResult pca_project(std::span<const Vector> vectors, std::span<const std::string> groups, std::size_t out_dim) {
  if (vectors.size() < 3) throw Error(ErrorCode::DegenerateData, "need at least 3 vectors");
  if (groups.size() != vectors.size()) throw Error(ErrorCode::InvalidArgument, "one group label per vector");
  const auto n = static_cast<Eigen::Index>(vectors.size());
  const auto d = static_cast<Eigen::Index>(vectors.front().size());
  if (out_dim < 1 || static_cast<Eigen::Index>(out_dim) >= d) {
    throw Error(ErrorCode::DegenerateData, "out_dim must be in [1, d)");
  }

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector& v = vectors[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(v.size()) != d) throw Error(ErrorCode::DimMismatch, "ragged input vectors");
    x.row(i) = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
  const double total_variance = cov.trace();
  if (!(total_variance > 0.0)) throw Error(ErrorCode::DegenerateData, "all points coincide");

  PcaResult result;
  std::vector<Eigen::VectorXd> basis;
  for (std::size_t c = 0; c < out_dim; ++c) {
    // Fixed, dense start vector so results are reproducible.
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = 1.0 + 0.01 * static_cast<double>((i * 7919) % 101);
    orthogonalize(v, basis);
    v.normalize();
    double eigenvalue = 0.0;
    for (int iter = 0; iter < kMaxPowerIterations; ++iter) {
      Eigen::VectorXd w = cov * v;
      orthogonalize(w, basis);
      const double norm = w.norm();
      if (norm <= 1e-12 * total_variance) {
        // Remaining variance is numerically zero: any orthogonal direction works.
        v = any_orthogonal(d, basis);
        eigenvalue = 0.0;
        break;
      }
      v = w / norm;
      const double next = v.dot(cov * v);
      const bool converged = std::abs(next - eigenvalue) <= kEigenTolerance * std::abs(next);
      eigenvalue = next;
      if (converged) break;
    }
    fix_sign(v);
    cov -= eigenvalue * v * v.transpose();
    basis.push_back(v);
    result.explained_variance.push_back(eigenvalue);
    result.components.emplace_back(v.data(), v.data() + v.size());
  }

  result.points.reserve(vectors.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    ProjectedPoint p{groups[static_cast<std::size_t>(i)], Vector(out_dim)};
    for (std::size_t c = 0; c < out_dim; ++c) p.coords[c] = x.row(i).dot(basis[c]);
    result.points.push_back(std::move(p));
  }
  return result;
}

}  // namespace hyex
