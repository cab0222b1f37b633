#pragma once

// File-level commands behind the deeplrr CLI: synthesise, train, cluster,
// grid search, heatmap and the one-shot pipeline. Each command reads and
// writes only under the paths it is given.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "deeplrr/error.hpp"
#include "deeplrr/heatmap.hpp"
#include "deeplrr/matrix_io.hpp"
#include "deeplrr/metrics.hpp"
#include "deeplrr/network.hpp"
#include "deeplrr/spectral.hpp"
#include "deeplrr/synth.hpp"

namespace deeplrr {

namespace fs = std::filesystem;

/// Carries the failing stage of a multi-stage command.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path, false);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Sample standard deviation; zero for a single value.
inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------- synth

struct SynthOutput {
  fs::path matrix;
  fs::path labels;
};

inline SynthOutput cmd_synth(const SynthSpec& spec, const fs::path& out_dir, MatrixFormat format) {
  const auto data = generate_subspaces(spec);
  SynthOutput out;
  out.matrix = out_dir / (format == MatrixFormat::kCsv ? "X.csv" : "X.dlrm");
  out.labels = out_dir / "labels.txt";
  write_matrix(data.X, out.matrix, format);
  write_labels(data.truth, out.labels);
  return out;
}

// ---------------------------------------------------------------- train

struct TrainOutput {
  NetworkModel model;
  fs::path model_dir;
  std::vector<fs::path> files;     // model files followed by history logs
  std::vector<double> layer_ms;    // wall clock per layer
};

inline std::string format_history(const AlmState& st) {
  std::string out = "iter,residual_inf,objective,mu\n";
  for (std::size_t k = 0; k < st.residual_history.size(); ++k) {
    out += std::to_string(k + 1) + ',' + detail::format_double(st.residual_history[k]) + ',' +
           detail::format_double(st.objective_history[k]) + ',' + detail::format_double(st.mu_history[k]) +
           '\n';
  }
  return out;
}

/// Trains, then writes out_dir/model/ and out_dir/layer<l>_history.csv.
inline TrainOutput cmd_train(const Matrix& X, const SolverConfig& cfg, const fs::path& out_dir) {
  TrainOutput out;
  out.model = train(X, cfg);
  out.layer_ms = out.model.layer_ms;
  out.model_dir = out_dir / "model";
  out.files = save_model(out.model, out.model_dir);
  for (int l = 1; l <= out.model.depth(); ++l) {
    out.files.push_back(out_dir / ("layer" + std::to_string(l) + "_history.csv"));
    detail::write_text(out.files.back(), format_history(out.model.states[static_cast<std::size_t>(l - 1)]));
  }
  return out;
}

inline TrainOutput cmd_train(const fs::path& input, const SolverConfig& cfg, const fs::path& out_dir) {
  return cmd_train(read_matrix(input), cfg, out_dir);
}

// ---------------------------------------------------------------- cluster

struct ClusterOptions {
  int layer = 0;  // 0 selects the deepest layer
  int clusters = 10;
  std::uint64_t seed = 0;
  int restarts = 20;
  int repeat = 1;
};

struct RunScores {
  double acc = 0.0, nmi = 0.0, f_score = 0.0, block_score = 0.0;
};

struct ClusterOutput {
  LabelVector labels;           // from the first repetition
  std::vector<RunScores> runs;  // empty without ground truth
  fs::path labels_path;
  std::optional<fs::path> metrics_path;
};

inline std::string format_metrics(const std::vector<RunScores>& runs) {
  using detail::format_double;
  std::string out = "run,acc,nmi,f_score,block_score\n";
  std::vector<double> acc, nm, f, bs;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& s = runs[r];
    out += std::to_string(r) + ',' + format_double(s.acc) + ',' + format_double(s.nmi) + ',' +
           format_double(s.f_score) + ',' + format_double(s.block_score) + '\n';
    acc.push_back(s.acc);
    nm.push_back(s.nmi);
    f.push_back(s.f_score);
    bs.push_back(s.block_score);
  }
  const auto a = detail::mean_std(acc), n = detail::mean_std(nm), fs_ = detail::mean_std(f),
             b = detail::mean_std(bs);
  out += "mean," + format_double(a.mean) + ',' + format_double(n.mean) + ',' + format_double(fs_.mean) + ',' +
         format_double(b.mean) + '\n';
  out += "std," + format_double(a.std) + ',' + format_double(n.std) + ',' + format_double(fs_.std) + ',' +
         format_double(b.std) + '\n';
  return out;
}

/// Clusters with the coefficients of one layer; repetitions use seeds
/// seed, seed + 1, ... on the same model.
inline ClusterOutput cluster_layer(const Matrix& Z, const ClusterOptions& opt, const LabelVector* truth) {
  if (opt.repeat < 1) throw Error(ErrorCode::kInvalidArgument, "repeat must be positive");
  if (truth && truth->size() != static_cast<std::size_t>(Z.rows())) {
    throw Error(ErrorCode::kDimensionMismatch, "truth labels do not match the sample count");
  }
  ClusterOutput out;
  const Affinity affinity = build_affinity(Z);
  const Matrix embedding = spectral_embed(affinity, opt.clusters);
  const double block = truth ? block_diagonal_score(affinity.W, *truth) : 0.0;
  for (int r = 0; r < opt.repeat; ++r) {
    auto km = kmeans(embedding, opt.clusters, opt.seed + static_cast<std::uint64_t>(r), opt.restarts);
    if (r == 0) out.labels = km.labels;
    if (truth) {
      const auto rep = evaluate(*truth, km.labels);
      out.runs.push_back({rep.acc, rep.nmi, rep.f_score, block});
    }
  }
  return out;
}

inline ClusterOutput cmd_cluster(const fs::path& model_dir, const ClusterOptions& opt,
                                 const std::optional<fs::path>& truth_path, const fs::path& out_dir) {
  const auto model = load_model(model_dir);
  const int layer = opt.layer == 0 ? model.depth() : opt.layer;
  const auto& Z = model.layer(layer).Z;
  std::optional<LabelVector> truth;
  if (truth_path) truth = read_labels(*truth_path);

  auto out = cluster_layer(Z, opt, truth ? &*truth : nullptr);
  out.labels_path = out_dir / "pred_labels.txt";
  write_labels(out.labels, out.labels_path);
  if (truth) {
    out.metrics_path = out_dir / "metrics.csv";
    detail::write_text(*out.metrics_path, format_metrics(out.runs));
  }
  return out;
}

// ---------------------------------------------------------------- grid

struct GridAxes {
  std::vector<double> lambda1;
  std::vector<double> alpha;
  std::vector<double> rho;
  std::vector<int> layers;
};

struct GridCell {
  double lambda1 = 0.0, alpha = 0.0, rho = 0.0;
  int layers = 0;
  bool ok = false;
  std::string error;
  detail::MeanStd acc, nmi, f_score;
  double block_score = 0.0;
};

inline std::string format_grid(const std::vector<GridCell>& cells) {
  using detail::format_double;
  std::string out =
      "lambda1,alpha,rho,layers,status,acc_mean,acc_std,nmi_mean,nmi_std,f_score_mean,f_score_std,block_score\n";
  for (const auto& c : cells) {
    out += format_double(c.lambda1) + ',' + format_double(c.alpha) + ',' + format_double(c.rho) + ',' +
           std::to_string(c.layers) + ',';
    if (!c.ok) {
      out += "failed,,,,,,,\n";
      continue;
    }
    out += "ok," + format_double(c.acc.mean) + ',' + format_double(c.acc.std) + ',' + format_double(c.nmi.mean) +
           ',' + format_double(c.nmi.std) + ',' + format_double(c.f_score.mean) + ',' +
           format_double(c.f_score.std) + ',' + format_double(c.block_score) + '\n';
  }
  return out;
}

/// Full Cartesian sweep. Cells run on worker threads and are reported in
/// lambda1-major, layers-minor order; a failing cell is marked and skipped.
inline std::vector<GridCell> run_grid(const Matrix& X, const LabelVector& truth, const SolverConfig& base,
                                      const GridAxes& axes, int repetitions, unsigned threads = 0) {
  if (axes.lambda1.empty() || axes.alpha.empty() || axes.rho.empty() || axes.layers.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "grid candidate lists must be non-empty");
  }
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "repetitions must be positive");
  if (truth.size() != static_cast<std::size_t>(X.cols())) {
    throw Error(ErrorCode::kDimensionMismatch, "truth labels do not match the sample count");
  }

  std::vector<GridCell> cells;
  for (double l1 : axes.lambda1)
    for (double a : axes.alpha)
      for (double r : axes.rho)
        for (int L : axes.layers) {
          GridCell c;
          c.lambda1 = l1;
          c.alpha = a;
          c.rho = r;
          c.layers = L;
          cells.push_back(c);
        }

  auto run_cell = [&](GridCell& cell) {
    try {
      SolverConfig cfg = base;
      cfg.lambda1 = cell.lambda1;
      cfg.alpha = cell.alpha;
      cfg.rho = cell.rho;
      cfg.layers = cell.layers;
      const auto model = train(X, cfg);
      ClusterOptions opt{0, cfg.clusters, cfg.seed, cfg.kmeans_restarts, repetitions};
      const auto res = cluster_layer(model.layers.back().Z, opt, &truth);
      std::vector<double> acc, nm, f;
      for (const auto& s : res.runs) {
        acc.push_back(s.acc);
        nm.push_back(s.nmi);
        f.push_back(s.f_score);
      }
      cell.acc = detail::mean_std(acc);
      cell.nmi = detail::mean_std(nm);
      cell.f_score = detail::mean_std(f);
      cell.block_score = res.runs.front().block_score;
      cell.ok = true;
    } catch (const Error& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
    });
  }
  for (auto& th : pool) th.join();
  return cells;
}

inline std::vector<GridCell> cmd_grid(const fs::path& data, const fs::path& truth, const SolverConfig& base,
                                      const GridAxes& axes, int repetitions, const fs::path& out_csv) {
  const auto cells = run_grid(read_matrix(data), read_labels(truth), base, axes, repetitions);
  detail::write_text(out_csv, format_grid(cells));
  return cells;
}

// ---------------------------------------------------------------- heatmap

inline void cmd_heatmap(const fs::path& matrix, const fs::path& out, bool as_affinity = false) {
  Matrix m = read_matrix(matrix);
  if (as_affinity) m = build_affinity(m).W;
  write_heatmap(m, out);
}

// ---------------------------------------------------------------- pipeline

struct PipelineOptions {
  SynthSpec synth;
  SolverConfig config;
  MatrixFormat format = MatrixFormat::kBinary;
  int repeat = 1;
};

struct PipelineRun {
  SolverConfig config;
  fs::path out_dir;
  fs::path manifest;
  std::vector<fs::path> artifacts;
  std::vector<RunScores> runs;
  std::vector<double> layer_ms;
  NetworkModel model;
};

/// data -> layers -> affinity -> NCut -> metrics, with a manifest.json
/// listing every artifact and its size. Errors are rethrown as StageError.
inline PipelineRun cmd_pipeline(const PipelineOptions& opt, const fs::path& out_dir) {
  PipelineRun run;
  run.config = opt.config;
  run.out_dir = out_dir;

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e);
    }
  };

  const auto t_synth = std::chrono::steady_clock::now();
  const auto data = stage("synth", [&] { return cmd_synth(opt.synth, out_dir, opt.format); });
  const double synth_ms = detail::elapsed_ms(t_synth);
  run.artifacts = {data.matrix, data.labels};

  auto trained = stage("train", [&] { return cmd_train(data.matrix, opt.config, out_dir); });
  run.artifacts.insert(run.artifacts.end(), trained.files.begin(), trained.files.end());
  run.layer_ms = trained.layer_ms;

  const auto t_cluster = std::chrono::steady_clock::now();
  ClusterOptions copt{0, opt.config.clusters, opt.config.seed, opt.config.kmeans_restarts, opt.repeat};
  auto clustered = stage("cluster", [&] { return cmd_cluster(trained.model_dir, copt, data.labels, out_dir); });
  const double cluster_ms = detail::elapsed_ms(t_cluster);
  run.artifacts.push_back(clustered.labels_path);
  run.artifacts.push_back(*clustered.metrics_path);
  run.runs = clustered.runs;

  const auto heatmap = out_dir / "affinity.pgm";
  stage("heatmap", [&] {
    write_heatmap(build_affinity(trained.model.layers.back().Z).W, heatmap);
    return 0;
  });
  run.artifacts.push_back(heatmap);

  nlohmann::ordered_json manifest;
  manifest["config"] = format_config(opt.config);
  manifest["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& p : run.artifacts) {
    manifest["artifacts"].push_back(
        {{"path", fs::relative(p, out_dir).generic_string()}, {"bytes", fs::file_size(p)}});
  }
  manifest["converged"] = nlohmann::ordered_json::array();
  for (const auto& st : trained.model.states) manifest["converged"].push_back(st.converged);
  manifest["timing_ms"] = {{"synth", synth_ms}, {"layers", run.layer_ms}, {"cluster", cluster_ms}};

  run.manifest = out_dir / "manifest.json";
  stage("manifest", [&] {
    detail::write_text(run.manifest, manifest.dump(2) + "\n");
    return 0;
  });
  run.model = std::move(trained.model);
  return run;
}

}  // namespace deeplrr
