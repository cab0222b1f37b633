// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deeplrr/deeplrr.hpp"
#include "oracles.hpp"

using namespace deeplrr;
namespace fs = std::filesystem;

namespace {

constexpr double kA1MinAcc = 0.99;
constexpr double kA1MinNmi = 0.99;
constexpr double kA1MaxSeconds = 60.0;
constexpr int kA2MinSeeds = 8;
constexpr int kA3MaxIter = 200;
constexpr double kA3Residual = 1e-7;
constexpr double kStationarityTol = 1e-6;
constexpr double kPerturbTol = 1e-10;
constexpr double kGridSpacing = 1e-4;
constexpr double kNmiTol = 1e-12;
constexpr double kNormSlack = 1e-9;

int failures = 0;
std::map<int, std::string> lines;

void report(const char* id, bool ok, const std::string& detail) {
  lines[std::atoi(id + 1)] = std::string(id) + (ok ? " PASS " : " FAIL ") + detail;
  std::fprintf(stderr, "%s done\n", id);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SynthData a1_data() {
  SynthSpec spec;
  spec.noise_variance = 0.01;
  return generate_subspaces(spec);
}

SolverConfig a1_config() {
  SolverConfig cfg;
  cfg.layers = 3;
  cfg.rho = 1.0;
  cfg.lambda1 = 0.1;
  cfg.alpha = 1.0;
  cfg.clusters = 10;
  cfg.kmeans_restarts = 20;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void a1_a3_a10() {
  const auto start = std::chrono::steady_clock::now();
  const auto data = a1_data();
  const auto cfg = a1_config();
  const auto model = train(data.X, cfg);
  const auto clustered = cluster_layer(model.layers.back().Z, {0, cfg.clusters, 0, cfg.kmeans_restarts, 10}, &data.truth);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  double acc = 0, nm = 0;
  for (const auto& r : clustered.runs) {
    acc += r.acc;
    nm += r.nmi;
  }
  acc /= static_cast<double>(clustered.runs.size());
  nm /= static_cast<double>(clustered.runs.size());
  report("A1", acc >= kA1MinAcc && nm >= kA1MinNmi && seconds <= kA1MaxSeconds,
         fmt("mean ACC=%.4f (>= %.2f) mean NMI=%.4f (>= %.2f) over 10 seeds, %.1fs (<= %.0fs)", acc, kA1MinAcc, nm,
             kA1MinNmi, seconds, kA1MaxSeconds));

  bool ok3 = true;
  std::string d3;
  for (int l = 1; l <= model.depth(); ++l) {
    const auto& st = model.states[static_cast<std::size_t>(l - 1)];
    const double last = st.residual_history.back();
    ok3 = ok3 && st.converged && st.iter <= kA3MaxIter && last <= kA3Residual && last <= cfg.eps;
    d3 += fmt("L%d: %d iters, residual %.2e; ", l, st.iter, last);
  }
  report("A3", ok3, d3 + fmt("limits %d iters, %.0e", kA3MaxIter, kA3Residual));

  bool ok10 = true;
  std::string d10 = "ranks";
  int prev = -1;
  for (int l = 0; l <= 3; ++l) {
    const int r = numerical_rank(model.inputs[static_cast<std::size_t>(l)]);
    if (prev >= 0 && r > prev) ok10 = false;
    prev = r;
    d10 += fmt(" %d", r);
  }
  report("A10", ok10, d10 + " (non-increasing)");
}

void a2() {
  int good = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthSpec spec;
    spec.noise_variance = 0.1;
    spec.seed = seed;
    const auto data = generate_subspaces(spec);
    SolverConfig cfg;
    cfg.layers = 3;
    cfg.lambda1 = 0.1;
    cfg.rho = 10.0;
    cfg.alpha = 1.0;
    const auto model = train(data.X, cfg);
    double s[3];
    for (int l = 0; l < 3; ++l) s[l] = block_diagonal_score(build_affinity(model.layers[static_cast<std::size_t>(l)].Z).W, data.truth);
    const bool mono = s[0] <= s[1] && s[1] <= s[2];
    good += mono;
    if (seed < 3) detail += fmt("seed %llu: %.3f %.3f %.3f; ", static_cast<unsigned long long>(seed), s[0], s[1], s[2]);
  }
  report("A2", good >= kA2MinSeeds,
         detail + fmt("non-decreasing in %d/10 seeds (>= %d), lambda1=0.1 rho=10 alpha=1", good, kA2MinSeeds));
}

// Gradient of the Z sub-objective, written from the stacked least-squares form.
oracle::Matrix z_gradient(const Matrix& Z, const Matrix& A, const Matrix& P, const Matrix& E, const Matrix& Y,
                          double mu, double alpha) {
  const Matrix PA = P * A;
  Matrix Lambda(2 * A.rows(), A.cols());
  Lambda << std::sqrt(alpha) * PA, std::sqrt(mu) * (A - PA - E);
  Matrix Delta(2 * A.rows(), A.cols());
  Delta << std::sqrt(alpha) * PA, std::sqrt(mu) * A;
  return Z + Delta.transpose() * (Delta * Z - Lambda) - A.transpose() * Y;
}

oracle::Matrix p_gradient(const Matrix& P, const Matrix& A, const Matrix& Z, const Matrix& E, const Matrix& Y,
                          double mu, double alpha) {
  const Matrix Phi = A - A * Z;
  const Matrix R = Phi - E - P * A;
  return P + alpha * P * Phi * Phi.transpose() - Y * A.transpose() - mu * R * A.transpose();
}

double sampled_fd_max(const std::function<double(const Matrix&)>& f, const Matrix& X, int samples, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> pick(0, X.size() - 1);
  Matrix probe = X;
  const double h = 1e-5;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Index k = pick(rng);
    const double x0 = probe.data()[k];
    probe.data()[k] = x0 + h;
    const double fp = f(probe);
    probe.data()[k] = x0 - h;
    const double fm = f(probe);
    probe.data()[k] = x0;
    worst = std::max(worst, std::abs(fp - fm) / (2 * h));
  }
  return worst;
}

void a4() {
  const auto data = a1_data();
  SolverConfig cfg = a1_config();
  cfg.layers = 1;
  cfg.alpha = 0.0;
  const auto model = train(data.X, cfg);
  const auto direct = solve_layer(data.X, cfg, cfg.lambda1, 0.0);
  const auto& st = model.states[0];
  const bool identical = model.layers[0].Z == direct.params.Z && model.layers[0].P == direct.params.P &&
                         model.layers[0].E == direct.params.E && st.Y == direct.state.Y &&
                         st.residual_history == direct.state.residual_history &&
                         st.objective_history == direct.state.objective_history && st.mu_history == direct.state.mu_history;

  // Replay the final step from the previous iterate.
  SolverConfig prev_cfg = cfg;
  prev_cfg.max_iter = st.iter - 1;
  const auto prev = solve_layer(data.X, prev_cfg, cfg.lambda1, 0.0);
  const Matrix& A = data.X;
  const Matrix& Z = direct.params.Z;
  const Matrix& P = direct.params.P;
  const double mu = prev.state.mu;

  const double hz = oracle::z_hessian_norm(A, prev.params.P, mu, 0.0);
  const double hp = oracle::p_hessian_norm(A, Z, mu, 0.0);
  const double gz = z_gradient(Z, A, prev.params.P, prev.params.E, prev.state.Y, mu, 0.0).cwiseAbs().maxCoeff();
  const double gp = p_gradient(P, A, Z, prev.params.E, prev.state.Y, mu, 0.0).cwiseAbs().maxCoeff();
  std::mt19937_64 rng(4);
  auto Jz = [&](const Matrix& z) { return oracle::z_objective(z, A, prev.params.P, prev.params.E, prev.state.Y, mu, 0.0); };
  auto Jp = [&](const Matrix& p) { return oracle::p_objective(p, A, Z, prev.params.E, prev.state.Y, mu, 0.0); };
  const double fz = sampled_fd_max(Jz, Z, 200, rng);
  const double fp = sampled_fd_max(Jp, P, 200, rng);
  const double rz = std::max(gz, fz) / (1 + hz);
  const double rp = std::max(gp, fp) / (1 + hp);
  report("A4", identical && rz <= kStationarityTol && rp <= kStationarityTol,
         fmt("bit-identical=%s, relative stationarity Z %.2e P %.2e (<= %.0e), %d iterations",
             identical ? "yes" : "no", rz, rp, kStationarityTol, st.iter));
}

void a5() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mu_d(0.01, 10.0), alpha_d(0.0, 5.0), scale(0.0, 1.0);
  double worst_grad = 0.0, worst_gain = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 8);
    const Index N = 1 + static_cast<Index>(rng() % 10);
    Rng g(rng());
    const Matrix A = gaussian_matrix(n, N, g);
    const Matrix P0 = scale(rng) * gaussian_matrix(n, n, g);
    const Matrix Z0 = scale(rng) * gaussian_matrix(N, N, g);
    const Matrix E = scale(rng) * gaussian_matrix(n, N, g);
    const Matrix Y = gaussian_matrix(n, N, g);
    const double mu = mu_d(rng), alpha = alpha_d(rng);

    const Matrix Z = update_z(A, P0, E, Y, mu, alpha);
    const Matrix P = update_p(A, Z0, E, Y, mu, alpha);
    auto Jz = [&](const Matrix& z) { return oracle::z_objective(z, A, P0, E, Y, mu, alpha); };
    auto Jp = [&](const Matrix& p) { return oracle::p_objective(p, A, Z0, E, Y, mu, alpha); };
    worst_grad = std::max(worst_grad, oracle::fd_gradient(Jz, Z).cwiseAbs().maxCoeff() /
                                          (1 + oracle::z_hessian_norm(A, P0, mu, alpha)));
    worst_grad = std::max(worst_grad, oracle::fd_gradient(Jp, P).cwiseAbs().maxCoeff() /
                                          (1 + oracle::p_hessian_norm(A, Z0, mu, alpha)));
    worst_gain = std::max(worst_gain, oracle::worst_perturbation_gain(Jz, Z, 100, 1e-3, rng));
    worst_gain = std::max(worst_gain, oracle::worst_perturbation_gain(Jp, P, 100, 1e-3, rng));
  }
  report("A5", worst_grad <= kStationarityTol && worst_gain <= kPerturbTol,
         fmt("100 instances: max relative FD gradient %.2e (<= %.0e), max perturbation decrease %.2e (<= %.0e)",
             worst_grad, kStationarityTol, worst_gain, kPerturbTol));
}

void a6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> mu_d(0.1, 10.0), lam_d(0.01, 5.0);
  double worst = 0.0;
  for (int block = 0; block < 10; ++block) {
    Rng g(rng());
    const Matrix S = 2.0 * gaussian_matrix(10, 100, g);
    const double mu = mu_d(rng), lambda = lam_d(rng);
    // With Z = 0, P = 0, Y = 0 the shrinkage argument is exactly the data.
    const Matrix E = update_e(S, Matrix::Zero(100, 100), Matrix::Zero(10, 10), Matrix::Zero(10, 100), mu, lambda);
    for (Index k = 0; k < S.size(); ++k) {
      worst = std::max(worst, std::abs(E.data()[k] - oracle::grid_shrink(S.data()[k], lambda / mu, kGridSpacing)));
    }
  }
  report("A6", worst <= kGridSpacing, fmt("10^4 scalars: max |E - grid argmin| %.2e (<= %.0e)", worst, kGridSpacing));
}

void a7() {
  std::mt19937_64 rng(7);
  int acc_bad = 0, f_bad = 0;
  double nmi_worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + rng() % 40;
    const int kt = 1 + static_cast<int>(rng() % 6), kp = 1 + static_cast<int>(rng() % 6);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng() % static_cast<std::uint64_t>(kt));
    for (auto& v : b) v = static_cast<int>(rng() % static_cast<std::uint64_t>(kp));
    const LabelVector ta(a), pb(b);
    acc_bad += accuracy(ta, pb) != oracle::brute_force_accuracy(a, b);
    f_bad += f_score(ta, pb) != oracle::pair_f_score(a, b);
    nmi_worst = std::max(nmi_worst, std::abs(nmi(ta, pb) - std::clamp(oracle::direct_nmi(a, b), 0.0, 1.0)));
  }
  report("A7", acc_bad == 0 && f_bad == 0 && nmi_worst <= kNmiTol,
         fmt("500 cases: ACC mismatches %d, F mismatches %d (exact), max NMI diff %.2e (<= %.0e)", acc_bad, f_bad,
             nmi_worst, kNmiTol));
}

void a8() {
  std::mt19937_64 rng(8);
  int bad = 0, rank_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 30);
    const Index N = 1 + static_cast<Index>(rng() % 30);
    const Index r = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(std::min(n, N)));
    Rng g(rng());
    const Matrix M = gaussian_matrix(n, r, g) * gaussian_matrix(r, N, g);
    const auto m = matrix_norms(M);
    rank_bad += m.numerical_rank != r;
    const double rr = static_cast<double>(m.numerical_rank);
    const double chain[5] = {m.operator_norm, m.frobenius, m.nuclear, std::sqrt(rr) * m.frobenius, rr * m.operator_norm};
    for (int i = 0; i < 4; ++i) bad += chain[i] > chain[i + 1] * (1 + kNormSlack);
  }
  report("A8", bad == 0 && rank_bad == 0,
         fmt("1000 matrices: %d chain violations (slack %.0e), %d rank misdetections", bad, kNormSlack, rank_bad));
}

void a9() {
  const auto data = a1_data();
  const auto cfg = a1_config();
  const double fractions[] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  constexpr int kCorruptionSeeds = 5;
  std::vector<detail::MeanStd> levels;
  std::string detail = "mean ACC";
  for (double f : fractions) {
    std::vector<double> accs;
    for (int c = 0; c < kCorruptionSeeds; ++c) {
      Rng rng(static_cast<std::uint64_t>(c));
      const Matrix X = corrupt_pixels(data.X, f, rng);
      const auto model = train(X, cfg);
      const auto res = cluster_layer(model.layers.back().Z, {0, cfg.clusters, 0, cfg.kmeans_restarts, 1}, &data.truth);
      accs.push_back(res.runs[0].acc);
    }
    levels.push_back(detail::mean_std(accs));
    detail += fmt(" %.3f", levels.back().mean);
  }
  bool ok = true;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    const double pooled = std::sqrt((levels[i].std * levels[i].std + levels[i + 1].std * levels[i + 1].std) / 2.0);
    if (levels[i + 1].mean > levels[i].mean + pooled) ok = false;
  }
  report("A9", ok, detail + " at corruption 0..0.6 (5 corruption seeds each, pooled-std tolerance)");
}

void a11() {
  const auto root = fs::temp_directory_path() / "deeplrr_acceptance_a11";
  fs::remove_all(root);
  const std::string flags = " --noise-variance 0.01 --layers 3 --rho 1 --lambda1 0.1 --alpha 1 --seed 0 --repeat 2";
  bool ran = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd =
        std::string(DEEPLRR_CLI_PATH) + " pipeline --out " + (root / run).string() + flags + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  int compared = 0, differ = 0;
  if (ran) {
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), root / "a");
      const auto name = rel.string();
      const bool model_file = rel.parent_path() == "model";
      const bool label_file = name == "labels.txt" || name == "pred_labels.txt";
      if (!model_file && !label_file) continue;
      ++compared;
      differ += slurp(entry.path()) != slurp(root / "b" / rel);
    }
  }
  fs::remove_all(root);
  report("A11", ran && compared >= 11 && differ == 0,
         fmt("pipeline ran twice: %s, %d model/label files compared, %d differ", ran ? "yes" : "no", compared, differ));
}

}  // namespace

int main() {
  try {
    a1_a3_a10();
    a2();
    a4();
    a5();
    a6();
    a7();
    a8();
    a9();
    a11();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
