#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "inopca/errors.hpp"
#include "inopca/vector_ops.hpp"

namespace inopca {

/// Cosine similarity Q = ξᵀx/(‖ξ‖‖x‖); equals ξᵀx/(p·λ) under ‖ξ‖ = √p.
inline double cosine_similarity(std::span<const double> x, std::span<const double> xi) {
  const double nx = vec::norm(x);
  const double nxi = vec::norm(xi);
  if (!(nx > 0.0)) throw DomainError("cosine similarity of a zero estimate");
  if (!(nxi > 0.0)) throw DomainError("cosine similarity against a zero signal");
  return std::clamp(vec::dot(x, xi) / (nx * nxi), -1.0, 1.0);
}

/// λ = ‖x‖/√p.
inline double norm_parameter(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return vec::norm(x) / std::sqrt(static_cast<double>(x.size()));
}

/// Column-major p×r basis.
using Basis = Eigen::MatrixXd;

inline Basis basis_from_columns(const std::vector<std::vector<double>>& columns) {
  if (columns.empty()) throw DomainError("empty basis");
  const auto p = static_cast<Eigen::Index>(columns.front().size());
  Basis b(p, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (static_cast<Eigen::Index>(columns[j].size()) != p) throw DomainError("basis columns differ in length");
    b.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(columns[j].data(), p);
  }
  return b;
}

/// Orthonormal basis of span(b); throws when the columns are (numerically) dependent.
inline Basis orthonormalize(const Basis& b) {
  Eigen::ColPivHouseholderQR<Basis> qr(b);
  qr.setThreshold(1e-10);
  if (qr.rank() < b.cols()) throw DomainError("rank-deficient basis");
  Basis q = qr.householderQ() * Basis::Identity(b.rows(), b.cols());
  return q;
}

/// Principal angles between span(u) and span(v), ascending.
inline std::vector<double> principal_angles(const Basis& u, const Basis& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols()) throw DomainError("bases must have equal shape");
  const Basis qu = orthonormalize(u);
  const Basis qv = orthonormalize(v);
  const Eigen::MatrixXd cross = qu.transpose() * qv;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    angles.push_back(std::acos(std::clamp(svd.singularValues()(i), 0.0, 1.0)));
  std::sort(angles.begin(), angles.end());
  return angles;
}

/// Grassmann distance: ℓ2 norm of the principal angles.
inline double grassmann_distance(const Basis& u, const Basis& v) {
  double sum = 0.0;
  for (double theta : principal_angles(u, v)) sum += theta * theta;
  return std::sqrt(sum);
}

/// Trapezoid rule over (possibly non-uniform) nodes.
inline double trapezoid(std::span<const double> values, std::span<const double> grid) {
  if (values.size() != grid.size()) throw std::invalid_argument("trapezoid: value/grid size mismatch");
  double sum = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) sum += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
  return sum;
}

/// ∫|h − P| by the trapezoid rule on a shared grid; lies in [0, 2] for normalized inputs.
inline double l1_density_distance(std::span<const double> histogram, std::span<const double> density,
                                  std::span<const double> grid) {
  if (histogram.size() != grid.size() || density.size() != grid.size())
    throw std::invalid_argument("l1_density_distance: grid mismatch");
  std::vector<double> diff(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) diff[i] = std::abs(histogram[i] - density[i]);
  return trapezoid(diff, grid);
}

struct Histogram {
  std::vector<double> density;
  std::size_t clamped = 0; ///< values that fell outside the grid and were counted in an end bin
};

/// Node-centred histogram normalized so its trapezoid integral is 1.
///
/// Bin i spans the midpoints around node i; the two end bins are half-width, which
/// makes the bin widths equal the trapezoid weights. Out-of-range values land in the
/// end bins and are counted in `clamped`.
inline Histogram empirical_histogram(std::span<const double> values, std::span<const double> grid) {
  if (grid.size() < 2) throw std::invalid_argument("histogram grid needs at least two nodes");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("histogram grid must be strictly increasing");
  const std::size_t n = grid.size();
  std::vector<double> edges(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) edges[i] = 0.5 * (grid[i] + grid[i + 1]);
  Histogram h{std::vector<double>(n, 0.0), 0};
  for (double v : values) {
    if (v < grid.front() || v > grid.back()) ++h.clamped;
    const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
    h.density[bin] += 1.0;
  }
  if (values.empty()) return h;
  const double total = static_cast<double>(values.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? grid.front() : edges[i - 1];
    const double hi = i + 1 == n ? grid.back() : edges[i];
    h.density[i] /= total * (hi - lo);
  }
  return h;
}

} // namespace inopca
