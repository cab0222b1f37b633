#pragma once

// Layer stacking. Layer l decomposes A_{l-1} = A_{l-1} Z_l + P_l A_{l-1} + E_l
// and hands the bilinear reconstruction A_l = P_l A_{l-1} Z_l to layer l + 1.
// A_0 is the data matrix X.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "deeplrr/error.hpp"
#include "deeplrr/layer_solver.hpp"
#include "deeplrr/matrix_io.hpp"

namespace deeplrr {

/// Sparsity weight of layer l (1-based): rho^(l-1) * lambda1.
inline double lambda_schedule(double lambda1, double rho, int layer) {
  if (layer < 1) throw Error(ErrorCode::kInvalidArgument, "layer index is 1-based");
  double lambda = lambda1;
  for (int l = 2; l <= layer; ++l) lambda *= rho;
  return lambda;
}

struct NetworkModel {
  SolverConfig config;
  std::vector<LayerParams> layers;  // layers[l-1] holds (Z_l, P_l, E_l)
  std::vector<AlmState> states;
  std::vector<Matrix> inputs;       // A_0 .. A_L
  std::vector<double> lambdas;      // lambda_1 .. lambda_L
  std::vector<double> layer_ms;     // wall clock per layer, diagnostics only

  int depth() const { return static_cast<int>(layers.size()); }

  bool all_converged() const {
    for (const auto& s : states)
      if (!s.converged) return false;
    return true;
  }

  const LayerParams& layer(int l) const {
    if (l < 1 || l > depth()) throw Error(ErrorCode::kNotFound, "layer " + std::to_string(l) + " not trained");
    return layers[static_cast<std::size_t>(l - 1)];
  }
};

/// A_l = P_l (A_{l-1} Z_l), with A_0 = X.
inline Matrix reconstruct_input(const NetworkModel& model, int l) {
  if (model.inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "model has no data");
  if (l < 0 || l > model.depth()) {
    throw Error(ErrorCode::kNotFound, "layer index " + std::to_string(l) + " beyond solved depth");
  }
  if (l == 0) return model.inputs.front();
  const auto& p = model.layer(l);
  return p.P * (model.inputs[static_cast<std::size_t>(l - 1)] * p.Z);
}

/// Trains all cfg.layers layers in sequence. A layer that hits max_iter
/// keeps its last iterate (state.converged == false) and training goes on.
inline NetworkModel train(const Matrix& X, const SolverConfig& cfg) {
  cfg.validate();
  if (X.size() == 0) throw Error(ErrorCode::kEmptyDimension, "empty data matrix");
  if (!X.allFinite()) throw Error(ErrorCode::kNonFinite, "data matrix contains NaN or Inf");

  NetworkModel model;
  model.config = cfg;
  model.inputs.push_back(X);
  for (int l = 1; l <= cfg.layers; ++l) {
    const auto start = std::chrono::steady_clock::now();
    const double lambda = lambda_schedule(cfg.lambda1, cfg.rho, l);
    auto result = solve_layer(model.inputs.back(), cfg, lambda, cfg.alpha);
    model.lambdas.push_back(lambda);
    model.layers.push_back(std::move(result.params));
    model.states.push_back(std::move(result.state));
    model.inputs.push_back(reconstruct_input(model, l));
    model.layer_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  return model;
}

namespace detail {
inline void require_trained(const NetworkModel& model) {
  if (model.depth() < 1 || model.inputs.size() != model.layers.size() + 1) {
    throw Error(ErrorCode::kInvalidArgument, "model is not trained");
  }
}
}  // namespace detail

/// P_L A_{L-1}.
inline Matrix deep_salient_features(const NetworkModel& model) {
  detail::require_trained(model);
  const int L = model.depth();
  return model.layer(L).P * model.inputs[static_cast<std::size_t>(L - 1)];
}

/// A_{L-1} Z_L.
inline Matrix deep_principal_features(const NetworkModel& model) {
  detail::require_trained(model);
  const int L = model.depth();
  return model.inputs[static_cast<std::size_t>(L - 1)] * model.layer(L).Z;
}

/// A_L = P_L A_{L-1} Z_L.
inline Matrix deep_reconstruction(const NetworkModel& model) {
  detail::require_trained(model);
  return model.inputs.back();
}

inline const Matrix& deep_sparse_error(const NetworkModel& model) {
  detail::require_trained(model);
  return model.layers.back().E;
}

// Model directories hold Z_<l>.dlrm, P_<l>.dlrm, E_<l>.dlrm and model.cfg.

inline std::vector<std::filesystem::path> save_model(const NetworkModel& model,
                                                     const std::filesystem::path& dir) {
  detail::require_trained(model);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  std::vector<std::filesystem::path> written;
  for (int l = 1; l <= model.depth(); ++l) {
    const auto& p = model.layer(l);
    const auto suffix = std::to_string(l) + ".dlrm";
    for (const auto& [name, m] : {std::pair{"Z_", &p.Z}, std::pair{"P_", &p.P}, std::pair{"E_", &p.E}}) {
      written.push_back(dir / (name + suffix));
      write_matrix(*m, written.back(), MatrixFormat::kBinary);
    }
  }
  written.push_back(dir / "model.cfg");
  write_config(model.config, written.back());
  return written;
}

/// Reads back the learned layers and the config echo. Per-layer inputs and
/// solver histories are not persisted, so they come back empty.
inline NetworkModel load_model(const std::filesystem::path& dir) {
  const auto cfg_path = dir / "model.cfg";
  if (!std::filesystem::exists(cfg_path)) throw Error(ErrorCode::kNotFound, "no model.cfg in " + dir.string());
  NetworkModel model;
  model.config = read_config(cfg_path);
  for (int l = 1;; ++l) {
    const auto suffix = std::to_string(l) + ".dlrm";
    if (!std::filesystem::exists(dir / ("Z_" + suffix))) break;
    LayerParams p;
    p.Z = read_matrix(dir / ("Z_" + suffix), MatrixFormat::kBinary);
    p.P = read_matrix(dir / ("P_" + suffix), MatrixFormat::kBinary);
    p.E = read_matrix(dir / ("E_" + suffix), MatrixFormat::kBinary);
    model.layers.push_back(std::move(p));
  }
  if (model.layers.empty()) throw Error(ErrorCode::kNotFound, "no layers in " + dir.string());
  return model;
}

}  // namespace deeplrr
