#pragma once

// One layer of the network: the latent low-rank decomposition
//
//   min  1/2 (|Z|_F^2 + |P|_F^2) + alpha/2 |P A - P A Z|_F^2 + lambda |E|_1
//   s.t. A = A Z + P A + E
//
// solved by inexact ALM with closed-form Z and P steps and soft-thresholding
// for E. A is n x N (features x samples), Z is N x N, P is n x n.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deeplrr/error.hpp"
#include "deeplrr/matrix_io.hpp"

namespace deeplrr {

struct LayerParams {
  Matrix Z;  // deep coefficients, N x N
  Matrix P;  // deep projection, n x n
  Matrix E;  // deep sparse error, n x N
};

struct AlmState {
  Matrix Y;  // multiplier, n x N
  double mu = 0.0;
  int iter = 0;
  bool converged = false;
  std::vector<double> residual_history;   // |A - AZ - PA - E|_inf after each iteration
  std::vector<double> objective_history;  // layer objective after each iteration
  std::vector<double> mu_history;         // penalty used during each iteration
};

struct LayerResult {
  LayerParams params;
  AlmState state;
};

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::kNumeric, std::string("NaN/Inf in ") + what);
}

// Solves X * M = B for X with M symmetric positive definite.
inline Matrix solve_right_spd(const Matrix& M, const Matrix& B, const char* what) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, std::string(what) + ": Cholesky failed");
  Matrix X = llt.solve(B.transpose()).transpose();
  require_finite(X, what);
  return X;
}

inline Matrix solve_left_spd(const Matrix& M, const Matrix& B, const char* what) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, std::string(what) + ": Cholesky failed");
  Matrix X = llt.solve(B);
  require_finite(X, what);
  return X;
}

// Z step with the Gram matrix A^T A supplied by the caller.
//
// With Delta = [sqrt(alpha) PA; sqrt(mu) A] and Lambda = [sqrt(alpha) PA; sqrt(mu) Xi]
// the normal equations read (I + Delta^T Delta) Z = Delta^T Lambda + A^T Y.
inline Matrix update_z(const Matrix& A, const Matrix& AtA, const Matrix& P, const Matrix& E,
                       const Matrix& Y, double mu, double alpha) {
  const Matrix PA = P * A;
  const Matrix Xi = A - PA - E;
  const Matrix PAtPA = PA.transpose() * PA;
  Matrix lhs = alpha * PAtPA + mu * AtA;
  lhs.diagonal().array() += 1.0;
  const Matrix rhs = alpha * PAtPA + A.transpose() * (mu * Xi + Y);
  return solve_left_spd(lhs, rhs, "Z update");
}

// P step with A A^T supplied. Phi = A - A Z must use the fresh Z.
inline Matrix update_p(const Matrix& A, const Matrix& AAt, const Matrix& Z, const Matrix& E,
                       const Matrix& Y, double mu, double alpha) {
  const Matrix Phi = A - A * Z;
  Matrix right = alpha * (Phi * Phi.transpose()) + mu * AAt;
  right.diagonal().array() += 1.0;
  const Matrix left = (Y + mu * (Phi - E)) * A.transpose();
  return solve_right_spd(right, left, "P update");
}

}  // namespace detail

/// Soft-thresholding: the minimiser of threshold*|e| + (e - x)^2 / 2.
inline double shrink(double x, double threshold) {
  const double mag = std::abs(x) - threshold;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

inline Matrix shrink(const Matrix& x, double threshold) {
  return x.unaryExpr([threshold](double v) { return shrink(v, threshold); });
}

/// Unique minimiser of the Z sub-problem with P, E, Y, mu held fixed.
inline Matrix update_z(const Matrix& A, const Matrix& P, const Matrix& E, const Matrix& Y,
                       double mu, double alpha) {
  if (!(mu > 0.0) || !(alpha >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "update_z needs mu > 0, alpha >= 0");
  return detail::update_z(A, A.transpose() * A, P, E, Y, mu, alpha);
}

/// Unique minimiser of the P sub-problem with Z, E, Y, mu held fixed.
inline Matrix update_p(const Matrix& A, const Matrix& Z, const Matrix& E, const Matrix& Y,
                       double mu, double alpha) {
  if (!(mu > 0.0) || !(alpha >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "update_p needs mu > 0, alpha >= 0");
  return detail::update_p(A, A * A.transpose(), Z, E, Y, mu, alpha);
}

/// E = shrink(A - AZ - PA + Y/mu, lambda/mu), element-wise.
inline Matrix update_e(const Matrix& A, const Matrix& Z, const Matrix& P, const Matrix& Y,
                       double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "update_e needs mu > 0, lambda > 0");
  const Matrix sigma = A - A * Z - P * A + Y / mu;
  return shrink(sigma, lambda / mu);
}

inline Matrix constraint_residual(const Matrix& A, const Matrix& Z, const Matrix& P, const Matrix& E) {
  return A - A * Z - P * A - E;
}

/// Y' = Y + mu * (A - AZ - PA - E), with the penalty in force before it grows.
inline Matrix update_multiplier(const Matrix& Y, double mu, const Matrix& A, const Matrix& Z,
                                const Matrix& P, const Matrix& E) {
  return Y + mu * constraint_residual(A, Z, P, E);
}

inline double inf_norm(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Layer objective with the l1 norm on E.
inline double layer_objective(const Matrix& A, const LayerParams& p, double lambda, double alpha) {
  const Matrix PA = p.P * A;
  return 0.5 * (p.Z.squaredNorm() + p.P.squaredNorm()) +
         0.5 * alpha * (PA - PA * p.Z).squaredNorm() + lambda * p.E.cwiseAbs().sum();
}

/// Runs inexact ALM from the all-zero start until the infinity-norm of the
/// constraint residual drops to cfg.eps or cfg.max_iter iterations elapse.
/// Non-convergence is reported through state.converged; a NaN anywhere is an
/// Error(kNumeric).
inline LayerResult solve_layer(const Matrix& A, const SolverConfig& cfg, double lambda, double alpha) {
  if (!A.allFinite()) throw Error(ErrorCode::kNonFinite, "layer input contains NaN or Inf");
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be non-negative");
  if (!(cfg.mu0 > 0.0) || !(cfg.eta > 1.0) || cfg.max_iter < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid ALM schedule");
  }

  const Index n = A.rows();
  const Index N = A.cols();
  const Matrix AtA = A.transpose() * A;
  const Matrix AAt = A * A.transpose();

  LayerResult out;
  auto& [Z, P, E] = out.params;
  auto& st = out.state;
  Z = Matrix::Zero(N, N);
  P = Matrix::Zero(n, n);
  E = Matrix::Zero(n, N);
  st.Y = Matrix::Zero(n, N);
  st.mu = cfg.mu0;

  for (int k = 0; k < cfg.max_iter; ++k) {
    const double mu = st.mu;
    Z = detail::update_z(A, AtA, P, E, st.Y, mu, alpha);
    P = detail::update_p(A, AAt, Z, E, st.Y, mu, alpha);
    E = update_e(A, Z, P, st.Y, mu, lambda);
    detail::require_finite(E, "E update");

    const Matrix residual = constraint_residual(A, Z, P, E);
    st.Y = st.Y + mu * residual;
    detail::require_finite(st.Y, "multiplier update");

    const double r = inf_norm(residual);
    st.residual_history.push_back(r);
    st.objective_history.push_back(layer_objective(A, out.params, lambda, alpha));
    st.mu_history.push_back(mu);
    st.iter = k + 1;
    st.mu = std::min(cfg.eta * mu, cfg.mu_max);

    if (r <= cfg.eps) {
      st.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace deeplrr
