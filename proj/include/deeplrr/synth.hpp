#pragma once

// Synthetic union-of-subspaces benchmark and the two corruption models used
// for robustness sweeps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "deeplrr/error.hpp"
#include "deeplrr/matrix_io.hpp"

namespace deeplrr {

using Rng = std::mt19937_64;

struct SynthSpec {
  int ambient_dim = 200;
  int subspace_dim = 10;
  int n_subspaces = 10;
  int samples_per_subspace = 9;
  double noise_variance = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (ambient_dim < 1 || subspace_dim < 1 || n_subspaces < 1 || samples_per_subspace < 1) {
      throw Error(ErrorCode::kInvalidArgument, "synthetic spec counts must be positive");
    }
    if (subspace_dim > ambient_dim) {
      throw Error(ErrorCode::kInvalidArgument, "subspace_dim exceeds ambient_dim");
    }
    if (!(noise_variance >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative noise variance");
  }
};

struct SynthData {
  Matrix X;
  LabelVector truth;
  std::vector<Matrix> bases;  // B_1..B_k
};

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Fill column-major order explicitly so the draw order is part of the contract.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

namespace detail {

// Thin Q of a Householder QR with the signs fixed so that diag(R) > 0.
inline Matrix orthonormalize(const Matrix& g) {
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < g.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

}  // namespace detail

/// ambient x dim matrix with orthonormal columns.
inline Matrix random_orthonormal_basis(int ambient, int dim, Rng& rng) {
  if (dim < 1 || ambient < 1) throw Error(ErrorCode::kInvalidArgument, "basis dimensions must be positive");
  if (dim > ambient) throw Error(ErrorCode::kInvalidArgument, "basis dim exceeds ambient dim");
  return detail::orthonormalize(gaussian_matrix(ambient, dim, rng));
}

/// Random element of SO(dim).
inline Matrix random_rotation(int dim, Rng& rng) {
  if (dim < 1) throw Error(ErrorCode::kInvalidArgument, "rotation dim must be positive");
  Matrix q = detail::orthonormalize(gaussian_matrix(dim, dim, rng));
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

/// Draw order: B_1, R, then C_1..C_k, then the additive noise.
inline SynthData generate_subspaces(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Index per = spec.samples_per_subspace;

  SynthData out;
  Matrix basis = random_orthonormal_basis(spec.ambient_dim, spec.subspace_dim, rng);
  const Matrix rotation = random_rotation(spec.ambient_dim, rng);

  out.X.resize(spec.ambient_dim, per * spec.n_subspaces);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(per * spec.n_subspaces));
  for (int i = 0; i < spec.n_subspaces; ++i) {
    if (i > 0) basis = rotation * basis;
    const Matrix coeffs = gaussian_matrix(spec.subspace_dim, per, rng);
    out.X.middleCols(i * per, per) = basis * coeffs;
    out.bases.push_back(basis);
    labels.insert(labels.end(), static_cast<std::size_t>(per), i);
  }
  if (spec.noise_variance > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.noise_variance));
    for (Index j = 0; j < out.X.cols(); ++j)
      for (Index r = 0; r < out.X.rows(); ++r) out.X(r, j) += noise(rng);
  }
  out.truth = LabelVector(std::move(labels));
  return out;
}

/// Adds N(0, (sqrt(variance_255)/255)^2) noise, i.e. a variance quoted on the
/// 0..255 gray scale applied to data normalised to [0, 1]. With clamp set the
/// result is clipped back into [0, 1].
inline Matrix add_gaussian_noise(const Matrix& X, double variance_255, Rng& rng, bool clamp = false) {
  if (!(variance_255 >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative noise variance");
  Matrix out = X;
  if (variance_255 > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(variance_255) / 255.0);
    for (Index j = 0; j < out.cols(); ++j)
      for (Index i = 0; i < out.rows(); ++i) out(i, j) += noise(rng);
  }
  if (clamp) out = out.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

/// Number of entries corrupt_pixels replaces.
inline Index corrupted_count(double fraction, Index total) {
  // The small nudge keeps products such as 0.29 * 100 from flooring to 28.
  return static_cast<Index>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

/// Replaces floor(fraction * n * N) entries, chosen without replacement, by
/// uniform [0, 1] values.
inline Matrix corrupt_pixels(const Matrix& X, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "corruption fraction must lie in [0, 1]");
  }
  Matrix out = X;
  const Index total = X.size();
  const Index count = corrupted_count(fraction, total);
  std::vector<Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, total - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    out.data()[idx[static_cast<std::size_t>(i)]] = unit(rng);
  }
  return out;
}

/// Share of affinity mass that falls inside ground-truth class blocks.
inline double block_diagonal_score(const Matrix& W, const LabelVector& truth) {
  if (W.rows() != W.cols() || static_cast<std::size_t>(W.rows()) != truth.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "affinity and labels disagree in size");
  }
  double inside = 0.0;
  double total = 0.0;
  for (Index j = 0; j < W.cols(); ++j) {
    for (Index i = 0; i < W.rows(); ++i) {
      total += W(i, j);
      if (truth[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(j)]) inside += W(i, j);
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace deeplrr
