#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sso/error.hpp"
#include "sso/grid.hpp"

namespace sso {

template <typename Scalar>
struct BasicEigenResult {
  std::vector<Scalar> eigenvalues;  // ascending
  std::vector<BasicField<Scalar>> eigenfunctions;  // unit L2 norm, zero off the mask
  int iterations = 0;
  Scalar max_residual = 0;  // max ||A u - lambda u|| / (lambda ||u||) over returned pairs
};

struct EigenOptions {
  int max_iterations = 2000;
  int extra_vectors = 4;  // block size is k + extra_vectors
  unsigned seed = 0x5eed;
};

namespace detail {

// Maps mask nodes to consecutive unknowns.
struct MaskIndexing {
  std::vector<Index> nodes;
  std::vector<Index> local;  // -1 for nodes outside the mask
};

inline MaskIndexing index_mask(const Mask& mask) {
  MaskIndexing m;
  m.local.assign(mask.size(), -1);
  for (Index i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      m.local[i] = Index(m.nodes.size());
      m.nodes.push_back(i);
    }
  return m;
}

}  // namespace detail

// Five-point (2D) / three-point (1D) Dirichlet Laplacian restricted to the
// mask; nodes off the mask are held at zero.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> masked_laplacian(const BasicGrid<Scalar>& grid, const Mask& mask) {
  const auto idx = detail::index_mask(mask);
  const Index n = Index(idx.nodes.size());
  const Scalar inv_h2 = Scalar(1) / (grid.h() * grid.h());
  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(std::size_t(n) * (2 * grid.dimension() + 1));
  for (Index r = 0; r < n; ++r) {
    const Index i = idx.nodes[r];
    triplets.emplace_back(r, r, 2 * grid.dimension() * inv_h2);
    grid.for_each_neighbor(i, [&](Index j) {
      if (idx.local[j] >= 0) triplets.emplace_back(r, idx.local[j], -inv_h2);
    });
  }
  Eigen::SparseMatrix<Scalar> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

namespace detail {

// 4-connected components of the mask, as node lists.
template <typename Scalar>
std::vector<std::vector<Index>> mask_components(const BasicGrid<Scalar>& grid, const Mask& mask) {
  std::vector<std::vector<Index>> out;
  std::vector<char> seen(std::size_t(mask.size()), 0);
  std::vector<Index> stack;
  for (Index s = 0; s < mask.size(); ++s) {
    if (!mask[s] || seen[s]) continue;
    out.emplace_back();
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index i = stack.back();
      stack.pop_back();
      out.back().push_back(i);
      grid.for_each_neighbor(i, [&](Index j) {
        if (mask[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      });
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

template <typename Scalar>
struct LocalEigenpairs {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;  // Euclidean-orthonormal columns
  int iterations = 0;
};

// Block inverse iteration (shift zero, the operator is SPD) with
// Rayleigh-Ritz on the block and locking of converged leading pairs.
template <typename Scalar>
LocalEigenpairs<Scalar> connected_eigenpairs(const BasicGrid<Scalar>& grid, const Mask& mask, Index k, Scalar tol,
                                             const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& warm_start,
                                             const EigenOptions& options) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto idx = index_mask(mask);
  const Index n = Index(idx.nodes.size());
  const Eigen::SparseMatrix<Scalar> a = masked_laplacian(grid, mask);
  LocalEigenpairs<Scalar> out;

  if (n <= 64) {
    Eigen::SelfAdjointEigenSolver<Matrix> dense{Matrix(a)};
    out.values = dense.eigenvalues().head(k);
    out.vectors = dense.eigenvectors().leftCols(k);
    return out;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> solver(a);
  if (solver.info() != Eigen::Success) throw ConvergenceError("Laplacian factorization failed", 0);

  std::mt19937 rng(options.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto random_column = [&](Matrix& m, Index c) {
    for (Index r = 0; r < n; ++r) m(r, c) = Scalar(unif(rng));
  };

  const Index block = std::min<Index>(n, k + options.extra_vectors);
  Matrix v(n, block);
  for (Index c = 0; c < block; ++c) {
    if (c < Index(warm_start.size()) && warm_start[c].size() == grid.size()) {
      for (Index r = 0; r < n; ++r) v(r, c) = warm_start[c][idx.nodes[r]];
      if (v.col(c).norm() > 0) continue;
    }
    random_column(v, c);
  }

  Matrix locked(n, 0);
  std::vector<Scalar> locked_values;
  Scalar last_residual = std::numeric_limits<Scalar>::infinity();
  auto orthonormalize = [&](Matrix& w) {
    for (int pass = 0; pass < 2; ++pass)
      if (locked.cols() > 0) w -= locked * (locked.transpose() * w);
    Eigen::HouseholderQR<Matrix> qr(w);
    w = qr.householderQ() * Matrix::Identity(w.rows(), w.cols());
  };
  orthonormalize(v);

  while (Index(locked_values.size()) < k) {
    if (++out.iterations > options.max_iterations)
      throw ConvergenceError("eigensolver did not converge", double(last_residual));
    Matrix w = solver.solve(v);
    orthonormalize(w);
    const Matrix aw = a * w;
    const Matrix projected = w.transpose() * aw;
    Eigen::SelfAdjointEigenSolver<Matrix> ritz(Scalar(0.5) * (projected + projected.transpose()));
    v = w * ritz.eigenvectors();
    const Matrix av = aw * ritz.eigenvectors();
    const Vector theta = ritz.eigenvalues();

    Index converged = 0;
    const Index wanted = k - Index(locked_values.size());
    for (Index c = 0; c < std::min(wanted, v.cols()) && c == converged; ++c) {
      const Scalar res = (av.col(c) - theta[c] * v.col(c)).norm() / std::abs(theta[c]);
      last_residual = res;
      if (res <= tol) ++converged;
    }
    if (converged == 0) continue;

    Matrix grown(n, locked.cols() + converged);
    grown << locked, v.leftCols(converged);
    locked = std::move(grown);
    for (Index c = 0; c < converged; ++c) locked_values.push_back(theta[c]);
    const Index remaining = k - Index(locked_values.size());
    if (remaining == 0) break;
    const Index active = std::min<Index>(n - locked.cols(), remaining + options.extra_vectors);
    Matrix next(n, active);
    const Index carried = std::min<Index>(active, v.cols() - converged);
    next.leftCols(carried) = v.middleCols(converged, carried);
    for (Index c = carried; c < active; ++c) random_column(next, c);
    orthonormalize(next);
    v = std::move(next);
  }
  out.values = Eigen::Map<Vector>(locked_values.data(), Index(locked_values.size()));
  out.vectors = std::move(locked);
  return out;
}

}  // namespace detail

// k smallest Dirichlet eigenpairs of the discrete Laplacian on `mask`.
//
// Each 4-connected component is solved separately (the operator is block
// diagonal) by shift-invert block iteration with deflation; the inner solve is
// a sparse LDL^T factorization computed once per component. The merged
// spectrum is returned, so every eigenfunction lives on one component.
// `warm_start` vectors (full-grid length) seed the first block columns.
template <typename Scalar>
BasicEigenResult<Scalar> smallest_eigenpairs(
    const GridPtr<Scalar>& grid, const Mask& mask, int k, Scalar tol = Scalar(1e-8),
    const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& warm_start = {},
    const EigenOptions& options = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  if (mask.size() != grid->size()) throw InvalidArgument("mask size does not match grid");
  if ((mask && !grid->inside()).any()) throw InvalidArgument("mask must lie inside the domain");
  if (k < 1) throw InvalidArgument("eigenpair count must be positive");
  if (!(tol > 0)) throw InvalidArgument("tolerance must be positive");
  const Index total = mask.count();
  if (total == 0) throw EmptyDomainError();
  if (k > total) throw InvalidArgument("more eigenpairs requested than mask nodes");

  struct Pair {
    Scalar value;
    std::size_t component;
    Index column;
  };
  const auto components = detail::mask_components(*grid, mask);
  std::vector<detail::LocalEigenpairs<Scalar>> local;
  std::vector<Mask> component_masks;
  std::vector<Pair> pairs;
  int iterations = 0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    Mask cm = Mask::Constant(mask.size(), false);
    for (Index i : components[c]) cm[i] = true;
    std::vector<Vector> warm;
    for (const auto& w : warm_start) {
      Vector restricted = cm.select(w, Vector::Zero(w.size()));
      if (restricted.norm() > 0) warm.push_back(std::move(restricted));
    }
    const Index kc = std::min<Index>(k, Index(components[c].size()));
    local.push_back(detail::connected_eigenpairs(*grid, cm, kc, tol, warm, options));
    iterations += local.back().iterations;
    for (Index j = 0; j < kc; ++j) pairs.push_back({local.back().values[j], c, j});
    component_masks.push_back(std::move(cm));
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.value < y.value; });

  BasicEigenResult<Scalar> result;
  result.iterations = iterations;
  const Scalar scale = Scalar(1) / std::sqrt(grid->cell_volume());
  for (int c = 0; c < k; ++c) {
    const Pair& pr = pairs[std::size_t(c)];
    const auto& nodes = components[pr.component];
    Vector col = local[pr.component].vectors.col(pr.column);
    col.normalize();
    Index peak;
    col.cwiseAbs().maxCoeff(&peak);
    if (col[peak] < 0) col = -col;
    Vector full = Vector::Zero(grid->size());
    for (std::size_t r = 0; r < nodes.size(); ++r) full[nodes[r]] = scale * col[Index(r)];
    const auto a = masked_laplacian(*grid, component_masks[pr.component]);
    const Scalar res = (a * col - pr.value * col).norm() / std::abs(pr.value);
    result.max_residual = std::max(result.max_residual, res);
    result.eigenvalues.push_back(pr.value);
    result.eigenfunctions.emplace_back(grid, std::move(full));
  }
  return result;
}

// int |grad v|^2 / int v^2 for nonnegative v; +inf when v vanishes.
template <typename Scalar>
Scalar rayleigh_quotient(const BasicField<Scalar>& v) {
  if ((v.values().array() < 0).any())
    throw InvalidArgument("rayleigh_quotient expects a nonnegative field; split into phases first");
  const Scalar mass = l2_inner(v, v);
  if (mass == 0) return std::numeric_limits<Scalar>::infinity();
  return dirichlet_energy(v) / mass;
}

using EigenResult = BasicEigenResult<double>;

}  // namespace sso
