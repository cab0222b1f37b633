#pragma once

// Dense matrix model, norm utilities and the on-disk formats for matrices,
// label vectors and solver configurations.
//
// Orientation throughout the library: features are rows, samples are
// columns, so a data set of N samples in R^n is an n x N matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "deeplrr/error.hpp"

namespace deeplrr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class MatrixFormat { kCsv, kBinary };

/// 0-based cluster / class assignments for N samples.
struct LabelVector {
  std::vector<int> labels;
  int k = 0;

  LabelVector() = default;
  explicit LabelVector(std::vector<int> values) : labels(std::move(values)) {
    for (int v : labels) {
      if (v < 0) throw Error(ErrorCode::kInvalidArgument, "negative label");
      k = std::max(k, v + 1);
    }
  }

  std::size_t size() const { return labels.size(); }
  int operator[](std::size_t i) const { return labels[i]; }

  /// True when every class 0..k-1 has at least one member.
  bool dense() const {
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int v : labels) seen[static_cast<std::size_t>(v)] = true;
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  }

  bool operator==(const LabelVector&) const = default;
};

struct SolverConfig {
  int layers = 3;
  double alpha = 1.0;
  double lambda1 = 0.1;
  double rho = 1.0;
  double mu0 = 1e-6;
  double mu_max = 1e6;
  double eta = 1.5;
  double eps = 1e-7;
  int max_iter = 500;
  std::uint64_t seed = 0;
  int clusters = 10;
  int kmeans_restarts = 20;

  void validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorCode::kInvalidArgument, what);
    };
    if (layers < 1) fail("layers must be positive");
    if (!(alpha >= 0.0)) fail("alpha must be non-negative");
    if (!(lambda1 > 0.0)) fail("lambda1 must be positive");
    if (!(rho >= 1.0)) fail("rho must be >= 1");
    if (!(mu0 > 0.0)) fail("mu0 must be positive");
    if (!(mu_max > 0.0)) fail("mu_max must be positive");
    if (!(eta > 1.0)) fail("eta must be > 1");
    if (!(eps > 0.0)) fail("eps must be positive");
    if (max_iter < 1) fail("max_iter must be positive");
    if (clusters < 1) fail("clusters must be positive");
    if (kmeans_restarts < 1) fail("kmeans_restarts must be positive");
  }

  bool operator==(const SolverConfig&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error(ErrorCode::kIo, "cannot format number");
  return std::string(buf.data(), ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc{} || ptr != end) {
    // from_chars accepts "nan"/"inf"; those are rejected separately as
    // non-finite, everything else unparsable is a non-numeric token.
    throw Error(ErrorCode::kNonNumeric, "'" + std::string(token) + "'");
  }
  return value;
}

template <typename Int>
Int parse_int(std::string_view token) {
  token = trim(token);
  Int value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc{} || ptr != end) {
    throw Error(ErrorCode::kNonNumeric, "'" + std::string(token) + "'");
  }
  return value;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b.data(), b.size());
}

inline void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  os.write(b.data(), b.size());
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

inline void check_finite(const Matrix& m) {
  if (!m.allFinite()) throw Error(ErrorCode::kNonFinite, "matrix contains NaN or Inf");
}

}  // namespace detail

inline constexpr std::array<char, 4> kBinaryMagic = {'D', 'L', 'R', 'M'};

/// Infers the format from the extension: ".csv" is CSV, anything else binary.
inline MatrixFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::kCsv : MatrixFormat::kBinary;
}

inline MatrixFormat parse_format(std::string_view name) {
  if (name == "csv") return MatrixFormat::kCsv;
  if (name == "binary") return MatrixFormat::kBinary;
  throw Error(ErrorCode::kInvalidArgument, "unknown format '" + std::string(name) + "'");
}

inline Matrix parse_csv_matrix(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t p = 0;
    while (true) {
      auto comma = line.find(',', p);
      auto tok = line.substr(p, comma == std::string_view::npos ? line.npos : comma - p);
      row.push_back(detail::parse_double(tok));
      if (comma == std::string_view::npos) break;
      p = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged CSV row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyDimension, "CSV has no rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  detail::check_finite(m);
  return m;
}

inline Matrix parse_binary_matrix(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || !std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kMalformedHeader, "missing DLRM header");
  }
  const auto rows = detail::get_le(p + 4, 4);
  const auto cols = detail::get_le(p + 8, 4);
  if (rows == 0 || cols == 0) throw Error(ErrorCode::kEmptyDimension, "zero rows or columns");
  const auto expected = 12 + rows * cols * 8;
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                "payload has " + std::to_string(bytes.size()) + " bytes, header implies " +
                    std::to_string(expected));
  }
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const unsigned char* data = p + 12;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = std::bit_cast<double>(detail::get_le(data, 8));
      data += 8;
    }
  }
  detail::check_finite(m);
  return m;
}

inline Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  const auto content = detail::slurp(path);
  return format == MatrixFormat::kCsv ? parse_csv_matrix(content) : parse_binary_matrix(content);
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  return read_matrix(path, format_from_path(path));
}

inline std::string to_csv(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += detail::format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_matrix(const Matrix& m, const std::filesystem::path& path, MatrixFormat format) {
  if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
      m.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "matrix too large for the binary format");
  }
  auto out = detail::open_out(path, format == MatrixFormat::kBinary);
  if (format == MatrixFormat::kCsv) {
    out << to_csv(m);
  } else {
    out.write(kBinaryMagic.data(), kBinaryMagic.size());
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) detail::put_f64(out, m(i, j));
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

inline void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  write_matrix(m, path, format_from_path(path));
}

// Label files: one base-10 integer per line.

inline LabelVector read_labels(const std::filesystem::path& path) {
  const auto text = detail::slurp(path);
  std::vector<int> values;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty()) continue;
    values.push_back(detail::parse_int<int>(t));
  }
  if (values.empty()) throw Error(ErrorCode::kEmptyDimension, "label file is empty");
  return LabelVector(std::move(values));
}

inline void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  auto out = detail::open_out(path, false);
  for (int v : labels.labels) out << v << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// Config files: "key = value" lines using the SolverConfig field names.

/// Applies one key/value pair to cfg. Unknown keys are rejected.
inline void apply_config_entry(SolverConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "layers") cfg.layers = parse_int<int>(value);
  else if (key == "alpha") cfg.alpha = parse_double(value);
  else if (key == "lambda1") cfg.lambda1 = parse_double(value);
  else if (key == "rho") cfg.rho = parse_double(value);
  else if (key == "mu0") cfg.mu0 = parse_double(value);
  else if (key == "mu_max") cfg.mu_max = parse_double(value);
  else if (key == "eta") cfg.eta = parse_double(value);
  else if (key == "eps") cfg.eps = parse_double(value);
  else if (key == "max_iter") cfg.max_iter = parse_int<int>(value);
  else if (key == "seed") cfg.seed = parse_int<std::uint64_t>(value);
  else if (key == "clusters") cfg.clusters = parse_int<int>(value);
  else if (key == "kmeans_restarts") cfg.kmeans_restarts = parse_int<int>(value);
  else throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
}

inline SolverConfig parse_config(std::string_view text, SolverConfig cfg = {}) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kMalformedHeader, "config line " + std::to_string(line_no) + " lacks '='");
    }
    apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline SolverConfig read_config(const std::filesystem::path& path, SolverConfig base = {}) {
  return parse_config(detail::slurp(path), base);
}

inline std::string format_config(const SolverConfig& cfg) {
  using detail::format_double;
  std::ostringstream out;
  out << "layers = " << cfg.layers << '\n'
      << "alpha = " << format_double(cfg.alpha) << '\n'
      << "lambda1 = " << format_double(cfg.lambda1) << '\n'
      << "rho = " << format_double(cfg.rho) << '\n'
      << "mu0 = " << format_double(cfg.mu0) << '\n'
      << "mu_max = " << format_double(cfg.mu_max) << '\n'
      << "eta = " << format_double(cfg.eta) << '\n'
      << "eps = " << format_double(cfg.eps) << '\n'
      << "max_iter = " << cfg.max_iter << '\n'
      << "seed = " << cfg.seed << '\n'
      << "clusters = " << cfg.clusters << '\n'
      << "kmeans_restarts = " << cfg.kmeans_restarts << '\n';
  return out.str();
}

inline void write_config(const SolverConfig& cfg, const std::filesystem::path& path) {
  auto out = detail::open_out(path, false);
  out << format_config(cfg);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// Norms.

struct MatrixNorms {
  double operator_norm = 0.0;
  double frobenius = 0.0;
  double nuclear = 0.0;
  Index numerical_rank = 0;
  Vector singular_values;  // descending, entries below the rank floor zeroed
};

/// Singular values from the eigenvalues of the smaller Gram matrix.
///
/// Squaring the matrix squares its condition number, so eigenvalues below
/// max(rows, cols) * machine-eps * lambda_max are indistinguishable from
/// rounding noise. Those are reported as zero singular values and excluded
/// from the rank; this is the max-dimension * eps rule applied to the Gram
/// spectrum.
inline MatrixNorms matrix_norms(const Matrix& m) {
  if (m.size() == 0) throw Error(ErrorCode::kEmptyDimension, "matrix_norms on empty matrix");
  const Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::kNumeric, "Gram eigendecomposition failed");

  Vector ev = eig.eigenvalues().reverse();  // descending
  const double lambda_max = std::max(ev.size() ? ev(0) : 0.0, 0.0);
  const double floor = static_cast<double>(std::max(m.rows(), m.cols())) *
                       std::numeric_limits<double>::epsilon() * lambda_max;

  MatrixNorms out;
  out.singular_values = Vector::Zero(ev.size());
  for (Index i = 0; i < ev.size(); ++i) {
    if (lambda_max > 0.0 && ev(i) > floor) {
      out.singular_values(i) = std::sqrt(ev(i));
      ++out.numerical_rank;
    }
  }
  out.operator_norm = out.singular_values.size() ? out.singular_values(0) : 0.0;
  out.nuclear = out.singular_values.sum();
  out.frobenius = m.norm();
  return out;
}

inline Index numerical_rank(const Matrix& m) { return matrix_norms(m).numerical_rank; }

}  // namespace deeplrr
