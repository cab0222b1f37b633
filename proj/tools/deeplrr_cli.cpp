// deeplrr command-line front end.
//
//   deeplrr synth    --out DIR [--format csv|binary] [--seed S] [--noise-variance V] ...
//   deeplrr train    --input X --out DIR [solver flags] [--config FILE]
//   deeplrr cluster  --model DIR --out DIR [--layer L] [--truth FILE] [--repeat R]
//   deeplrr grid     --input X --truth FILE --out DIR --lambda1-grid a,b,... [...]
//   deeplrr heatmap  --input M --out FILE.pgm [--affinity]
//   deeplrr pipeline --out DIR [synth flags] [solver flags] [--repeat R]
//
// Exit status: 0 success, 2 usage or invalid argument, 3 I/O, 4 malformed
// input data, 5 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "deeplrr/deeplrr.hpp"

namespace {

using namespace deeplrr;

enum ExitCode { kOk = 0, kUsage = 2, kIoFailure = 3, kBadData = 4, kNumericFailure = 5 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return kUsage;
    case ErrorCode::kIo:
    case ErrorCode::kNotFound: return kIoFailure;
    case ErrorCode::kMalformedHeader:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNonNumeric:
    case ErrorCode::kNonFinite:
    case ErrorCode::kEmptyDimension: return kBadData;
    case ErrorCode::kNumeric: return kNumericFailure;
  }
  return kUsage;
}

// Solver flags are optional so that only the ones given override the
// defaults and the --config file.
struct SolverFlags {
  std::optional<std::string> config_file;
  std::optional<int> layers, max_iter, clusters, kmeans_restarts;
  std::optional<double> alpha, lambda1, rho, mu0, mu_max, eta, eps;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value file with solver settings");
    app->add_option("--layers", layers, "number of layers L");
    app->add_option("--alpha", alpha, "neighbourhood reconstruction weight");
    app->add_option("--lambda1", lambda1, "sparse-error weight of the first layer");
    app->add_option("--rho", rho, "per-layer growth factor of lambda (>= 1)");
    app->add_option("--mu0", mu0, "initial ALM penalty");
    app->add_option("--mu-max", mu_max, "ALM penalty cap");
    app->add_option("--eta", eta, "ALM penalty growth factor");
    app->add_option("--eps", eps, "feasibility tolerance");
    app->add_option("--max-iter", max_iter, "iteration cap per layer");
    app->add_option("--clusters", clusters, "number of clusters k");
    app->add_option("--kmeans-restarts", kmeans_restarts, "k-means restarts");
    app->add_option("--seed", seed, "random seed");
  }

  SolverConfig resolve() const {
    SolverConfig cfg;
    if (config_file) cfg = read_config(*config_file, cfg);
    if (layers) cfg.layers = *layers;
    if (alpha) cfg.alpha = *alpha;
    if (lambda1) cfg.lambda1 = *lambda1;
    if (rho) cfg.rho = *rho;
    if (mu0) cfg.mu0 = *mu0;
    if (mu_max) cfg.mu_max = *mu_max;
    if (eta) cfg.eta = *eta;
    if (eps) cfg.eps = *eps;
    if (max_iter) cfg.max_iter = *max_iter;
    if (seed) cfg.seed = *seed;
    if (clusters) cfg.clusters = *clusters;
    if (kmeans_restarts) cfg.kmeans_restarts = *kmeans_restarts;
    cfg.validate();
    return cfg;
  }
};

struct SynthFlags {
  SynthSpec spec;
  void attach(CLI::App* app, bool with_seed) {
    app->add_option("--ambient-dim", spec.ambient_dim, "ambient dimension n")->capture_default_str();
    app->add_option("--subspace-dim", spec.subspace_dim, "dimension of each subspace")->capture_default_str();
    app->add_option("--subspaces", spec.n_subspaces, "number of subspaces")->capture_default_str();
    app->add_option("--samples-per-subspace", spec.samples_per_subspace, "samples drawn per subspace")
        ->capture_default_str();
    app->add_option("--noise-variance", spec.noise_variance, "variance of additive Gaussian noise")
        ->capture_default_str();
    if (with_seed) app->add_option("--seed", spec.seed, "random seed")->capture_default_str();
  }
};

void print_scores(const std::vector<RunScores>& runs) {
  if (runs.empty()) return;
  double acc = 0, nm = 0, f = 0;
  for (const auto& r : runs) {
    acc += r.acc;
    nm += r.nmi;
    f += r.f_score;
  }
  const double n = static_cast<double>(runs.size());
  std::cout << "acc=" << acc / n << " nmi=" << nm / n << " f_score=" << f / n
            << " block_score=" << runs.front().block_score << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilayer collaborative low-rank representation for subspace clustering"};
  app.require_subcommand(1);

  std::string out;
  std::string input;
  std::string format_name = "binary";
  std::optional<std::string> truth;
  int repeat = 1;

  // synth
  auto* synth = app.add_subcommand("synth", "generate the union-of-subspaces benchmark");
  SynthFlags synth_flags;
  synth_flags.attach(synth, true);
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--format", format_name, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));

  // train
  auto* train_cmd = app.add_subcommand("train", "train the layer stack on a data matrix");
  SolverFlags train_flags;
  train_flags.attach(train_cmd);
  train_cmd->add_option("--input", input, "data matrix (.csv or binary)")->required();
  train_cmd->add_option("--out", out, "output directory")->required();

  // cluster
  auto* cluster_cmd = app.add_subcommand("cluster", "NCut clustering from a trained model");
  std::string model_dir;
  int layer = 0;
  std::optional<int> k;
  std::optional<int> restarts;
  std::uint64_t cluster_seed = 0;
  cluster_cmd->add_option("--model", model_dir, "model directory written by train")->required();
  cluster_cmd->add_option("--layer", layer, "layer whose coefficients define the affinity (default: deepest)");
  cluster_cmd->add_option("--clusters", k, "number of clusters (default: from model.cfg)");
  cluster_cmd->add_option("--kmeans-restarts", restarts, "k-means restarts (default: from model.cfg)");
  cluster_cmd->add_option("--seed", cluster_seed, "first clustering seed");
  cluster_cmd->add_option("--truth", truth, "ground-truth label file; enables metrics.csv");
  cluster_cmd->add_option("--repeat", repeat, "clustering repetitions with seeds seed+r");
  cluster_cmd->add_option("--out", out, "output directory")->required();

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "grid search over lambda1, alpha, rho and L");
  SolverFlags grid_flags;
  grid_flags.attach(grid_cmd);
  GridAxes axes;
  std::string grid_truth;
  grid_cmd->add_option("--input", input, "data matrix")->required();
  grid_cmd->add_option("--truth", grid_truth, "ground-truth labels")->required();
  grid_cmd->add_option("--out", out, "output directory (grid.csv)")->required();
  grid_cmd->add_option("--lambda1-grid", axes.lambda1, "comma-separated lambda1 candidates")->delimiter(',');
  grid_cmd->add_option("--alpha-grid", axes.alpha, "comma-separated alpha candidates")->delimiter(',');
  grid_cmd->add_option("--rho-grid", axes.rho, "comma-separated rho candidates")->delimiter(',');
  grid_cmd->add_option("--layers-grid", axes.layers, "comma-separated layer counts")->delimiter(',');
  grid_cmd->add_option("--repeat", repeat, "clustering repetitions per cell");

  // heatmap
  auto* heat_cmd = app.add_subcommand("heatmap", "render |M| as a binary PGM");
  bool as_affinity = false;
  heat_cmd->add_option("--input", input, "matrix file")->required();
  heat_cmd->add_option("--out", out, "output .pgm path")->required();
  heat_cmd->add_flag("--affinity", as_affinity, "render (|M| + |M^T|)/2 instead of |M|");

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "synth, train, cluster and evaluate in one run");
  SynthFlags pipe_synth;
  pipe_synth.attach(pipe_cmd, false);
  SolverFlags pipe_flags;
  pipe_flags.attach(pipe_cmd);
  pipe_cmd->add_option("--out", out, "output directory")->required();
  pipe_cmd->add_option("--format", format_name, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));
  pipe_cmd->add_option("--repeat", repeat, "clustering repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      const auto files = cmd_synth(synth_flags.spec, out, parse_format(format_name));
      std::cout << files.matrix.string() << '\n' << files.labels.string() << '\n';
    } else if (*train_cmd) {
      const auto res = cmd_train(input, train_flags.resolve(), out);
      for (int l = 1; l <= res.model.depth(); ++l) {
        const auto& st = res.model.states[static_cast<std::size_t>(l - 1)];
        std::cout << "layer " << l << ": iterations=" << st.iter << " residual=" << st.residual_history.back()
                  << (st.converged ? "" : " (not converged)") << '\n';
      }
    } else if (*cluster_cmd) {
      const auto model_cfg = read_config(std::filesystem::path(model_dir) / "model.cfg");
      ClusterOptions opt{layer, k.value_or(model_cfg.clusters), cluster_seed,
                         restarts.value_or(model_cfg.kmeans_restarts), repeat};
      std::optional<std::filesystem::path> truth_path;
      if (truth) truth_path = *truth;
      const auto res = cmd_cluster(model_dir, opt, truth_path, out);
      std::cout << res.labels_path.string() << '\n';
      print_scores(res.runs);
    } else if (*grid_cmd) {
      const auto cfg = grid_flags.resolve();
      if (axes.lambda1.empty()) axes.lambda1 = {cfg.lambda1};
      if (axes.alpha.empty()) axes.alpha = {cfg.alpha};
      if (axes.rho.empty()) axes.rho = {cfg.rho};
      if (axes.layers.empty()) axes.layers = {cfg.layers};
      const auto csv = std::filesystem::path(out) / "grid.csv";
      const auto cells = cmd_grid(input, grid_truth, cfg, axes, repeat, csv);
      int failed = 0;
      for (const auto& c : cells) failed += c.ok ? 0 : 1;
      std::cout << csv.string() << ": " << cells.size() << " cells, " << failed << " failed\n";
    } else if (*heat_cmd) {
      cmd_heatmap(input, out, as_affinity);
    } else if (*pipe_cmd) {
      PipelineOptions opt;
      opt.synth = pipe_synth.spec;
      opt.config = pipe_flags.resolve();
      opt.synth.seed = opt.config.seed;
      opt.format = parse_format(format_name);
      opt.repeat = repeat;
      const auto run = cmd_pipeline(opt, out);
      std::cout << run.manifest.string() << '\n';
      print_scores(run.runs);
    }
  } catch (const StageError& e) {
    std::cerr << "deeplrr: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const Error& e) {
    std::cerr << "deeplrr: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "deeplrr: " << e.what() << '\n';
    return kIoFailure;
  }
  return kOk;
}
