#pragma once

// Clustering quality: accuracy under the best one-to-one label matching,
// normalised mutual information (sqrt normalisation) and pairwise F-score.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "deeplrr/error.hpp"
#include "deeplrr/matrix_io.hpp"

namespace deeplrr {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct MetricReport {
  double acc = 0.0;
  double nmi = 0.0;
  double f_score = 0.0;
  CountMatrix confusion;  // truth classes x predicted clusters
};

namespace detail {

inline void require_same_length(const LabelVector& a, const LabelVector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "label vectors differ in length");
  if (a.size() == 0) throw Error(ErrorCode::kEmptyDimension, "empty label vectors");
}

// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
// potentials, O(n^3)). Returns assignment[row] = column.
inline std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

}  // namespace detail

inline CountMatrix contingency(const LabelVector& truth, const LabelVector& pred) {
  detail::require_same_length(truth, pred);
  CountMatrix c = CountMatrix::Zero(truth.k, pred.k);
  for (std::size_t i = 0; i < truth.size(); ++i) ++c(truth[i], pred[i]);
  return c;
}

inline double accuracy(const LabelVector& truth, const LabelVector& pred) {
  const CountMatrix c = contingency(truth, pred);
  const int n = static_cast<int>(std::max(c.rows(), c.cols()));
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) cost[i][j] = -static_cast<double>(c(i, j));
  const auto match = detail::hungarian_min(cost);
  std::int64_t hits = 0;
  for (Index i = 0; i < c.rows(); ++i) {
    const int j = match[static_cast<std::size_t>(i)];
    if (j < c.cols()) hits += c(i, j);
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// I(U;V) / sqrt(H(U) H(V)), natural logs. Both partitions trivial gives 1;
/// exactly one trivial gives 0.
inline double nmi(const LabelVector& truth, const LabelVector& pred) {
  const CountMatrix c = contingency(truth, pred);
  const double n = static_cast<double>(truth.size());
  const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> rows = c.rowwise().sum();
  const Eigen::Matrix<std::int64_t, 1, Eigen::Dynamic> cols = c.colwise().sum();

  auto entropy = [n](const auto& counts) {
    double h = 0.0;
    for (Index i = 0; i < counts.size(); ++i) {
      if (counts(i) == 0) continue;
      const double p = static_cast<double>(counts(i)) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  const double hu = entropy(rows);
  const double hv = entropy(cols);
  if (hu == 0.0 && hv == 0.0) return 1.0;
  if (hu == 0.0 || hv == 0.0) return 0.0;

  double mi = 0.0;
  for (Index i = 0; i < c.rows(); ++i) {
    for (Index j = 0; j < c.cols(); ++j) {
      if (c(i, j) == 0) continue;
      const double nij = static_cast<double>(c(i, j));
      mi += nij / n * std::log(n * nij / (static_cast<double>(rows(i)) * static_cast<double>(cols(j))));
    }
  }
  return std::clamp(mi / std::sqrt(hu * hv), 0.0, 1.0);
}

/// Pairwise F-score over all N(N-1)/2 sample pairs.
inline double f_score(const LabelVector& truth, const LabelVector& pred) {
  detail::require_same_length(truth, pred);
  if (truth.size() < 2) throw Error(ErrorCode::kInvalidArgument, "F-score needs at least two samples");
  const CountMatrix c = contingency(truth, pred);
  auto pairs = [](std::int64_t m) { return m * (m - 1) / 2; };
  std::int64_t tp = 0, pred_pairs = 0, truth_pairs = 0;
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) tp += pairs(c(i, j));
  const auto rows = c.rowwise().sum().eval();
  const auto cols = c.colwise().sum().eval();
  for (Index i = 0; i < rows.size(); ++i) truth_pairs += pairs(rows(i));
  for (Index j = 0; j < cols.size(); ++j) pred_pairs += pairs(cols(j));

  const double precision = pred_pairs ? static_cast<double>(tp) / static_cast<double>(pred_pairs) : 0.0;
  const double recall = truth_pairs ? static_cast<double>(tp) / static_cast<double>(truth_pairs) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline MetricReport evaluate(const LabelVector& truth, const LabelVector& pred) {
  MetricReport r;
  r.confusion = contingency(truth, pred);
  r.acc = accuracy(truth, pred);
  r.nmi = nmi(truth, pred);
  r.f_score = truth.size() >= 2 ? f_score(truth, pred) : 0.0;
  return r;
}

}  // namespace deeplrr
