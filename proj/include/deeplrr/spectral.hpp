#pragma once

// Normalized-cut spectral clustering on the affinity W = (|Z| + |Z^T|) / 2:
// symmetric normalised Laplacian, k smallest eigenvectors, row
// normalisation, then k-means with k-means++ seeding.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "deeplrr/error.hpp"
#include "deeplrr/matrix_io.hpp"

namespace deeplrr {

struct Affinity {
  Matrix W;
};

struct KMeansResult {
  LabelVector labels;
  double objective = 0.0;
  Matrix centroids;
  std::vector<double> history;  // objective after every assignment and update step
};

struct ClusterResult {
  LabelVector labels;
  Matrix embedding;
  double kmeans_objective = 0.0;
  Affinity affinity;
};

inline Affinity build_affinity(const Matrix& Z) {
  if (Z.rows() != Z.cols()) throw Error(ErrorCode::kDimensionMismatch, "coefficient matrix must be square");
  Affinity a;
  a.W = Z.cwiseAbs();
  // W_ij and W_ji are both formed from the same pair, so W == W^T bit for bit.
  for (Index j = 0; j < a.W.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      const double w = (std::abs(Z(i, j)) + std::abs(Z(j, i))) / 2.0;
      a.W(i, j) = w;
      a.W(j, i) = w;
    }
  }
  return a;
}

/// I - D^{-1/2} W D^{-1/2}; zero-degree vertices get a zero row in D^{-1/2}.
inline Matrix normalized_laplacian(const Affinity& affinity) {
  const Matrix& W = affinity.W;
  const Index N = W.rows();
  Vector dinv(N);
  for (Index i = 0; i < N; ++i) {
    const double d = W.row(i).sum();
    dinv(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  Matrix L = -(dinv.asDiagonal() * W * dinv.asDiagonal());
  L.diagonal().array() += 1.0;
  // Symmetrise against rounding in the scaling products.
  return (L + L.transpose()) / 2.0;
}

struct SpectralEmbedding {
  Matrix embedding;     // N x k, unit-length rows (zero rows stay zero)
  Vector eigenvalues;   // full spectrum of the normalised Laplacian, ascending
};

inline SpectralEmbedding spectral_embed_full(const Affinity& affinity, int k) {
  const Index N = affinity.W.rows();
  if (k < 1 || k > N) throw Error(ErrorCode::kInvalidArgument, "need 1 <= k <= N for the embedding");
  if (!affinity.W.allFinite()) throw Error(ErrorCode::kNumeric, "affinity contains NaN or Inf");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normalized_laplacian(affinity));
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, "Laplacian eigendecomposition failed");

  SpectralEmbedding out;
  out.eigenvalues = eig.eigenvalues();
  out.embedding = eig.eigenvectors().leftCols(k);
  for (Index i = 0; i < N; ++i) {
    const double norm = out.embedding.row(i).norm();
    if (norm > 0.0) out.embedding.row(i) /= norm;
  }
  return out;
}

inline Matrix spectral_embed(const Affinity& affinity, int k) {
  return spectral_embed_full(affinity, k).embedding;
}

namespace detail {

inline double kmeans_cost(const Matrix& points, const Matrix& centroids, const std::vector<int>& labels) {
  double cost = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    cost += (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return cost;
}

// k-means++ seeding; rows of `points` are the observations.
inline Matrix kmeanspp_seed(const Matrix& points, int k, std::mt19937_64& rng) {
  const Index N = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(N), false);
  std::uniform_int_distribution<Index> first(0, N - 1);
  Index pick = first(rng);
  centroids.row(0) = points.row(pick);
  chosen[static_cast<std::size_t>(pick)] = true;

  Vector d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, total);
      double target = unit(rng);
      pick = N - 1;
      for (Index i = 0; i < N; ++i) {
        target -= d2(i);
        if (target < 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (d2(pick) == 0.0) {
        for (Index i = N - 1; i >= 0; --i)
          if (d2(i) > 0.0) { pick = i; break; }
      }
    } else {
      // Every remaining point coincides with a centre: take unused indices in order.
      pick = 0;
      while (chosen[static_cast<std::size_t>(pick)]) ++pick;
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace detail

/// One Lloyd run from k-means++ seeding. Empty clusters are re-seeded at the
/// point farthest from its current centroid.
inline KMeansResult kmeans_single(const Matrix& points, int k, std::uint64_t seed, int max_iter = 300) {
  const Index N = points.rows();
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  if (k > N) throw Error(ErrorCode::kInvalidArgument, "k exceeds the number of points");
  std::mt19937_64 rng(seed);

  KMeansResult out;
  out.centroids = detail::kmeanspp_seed(points, k, rng);
  std::vector<int> labels(static_cast<std::size_t>(N), -1);

  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Index i = 0; i < N; ++i) {
      Index best = 0;
      const Vector d = (out.centroids.rowwise() - points.row(i)).rowwise().squaredNorm();
      d.minCoeff(&best);
      int& li = labels[static_cast<std::size_t>(i)];
      // Ties keep the current label so assignments cannot oscillate.
      if (li >= 0 && d(li) <= d(best)) continue;
      li = static_cast<int>(best);
      changed = true;
    }
    out.history.push_back(detail::kmeans_cost(points, out.centroids, labels));
    if (!changed) break;

    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    Matrix sums = Matrix::Zero(k, points.cols());
    for (Index i = 0; i < N; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        out.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < N; ++i) {
        const int li = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(li)] < 2) continue;
        const double d = (points.row(i) - out.centroids.row(li)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d < 0.0) continue;
      --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      out.centroids.row(c) = points.row(far);
      changed = true;
    }
    out.history.push_back(detail::kmeans_cost(points, out.centroids, labels));
  }
  out.objective = detail::kmeans_cost(points, out.centroids, labels);
  out.labels.labels = std::move(labels);
  out.labels.k = k;
  return out;
}

/// Best of `restarts` runs seeded seed, seed+1, ...; ties go to the lowest offset.
inline KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts) {
  if (restarts < 1) throw Error(ErrorCode::kInvalidArgument, "restarts must be positive");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    auto run = kmeans_single(points, k, seed + static_cast<std::uint64_t>(r));
    if (r == 0 || run.objective < best.objective) best = std::move(run);
  }
  return best;
}

inline ClusterResult ncut_cluster(const Matrix& Z, int k, std::uint64_t seed, int restarts) {
  ClusterResult out;
  out.affinity = build_affinity(Z);
  out.embedding = spectral_embed(out.affinity, k);
  auto km = kmeans(out.embedding, k, seed, restarts);
  out.labels = std::move(km.labels);
  out.kmeans_objective = km.objective;
  return out;
}

}  // namespace deeplrr
