#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deeplrr/matrix_io.hpp"

namespace deeplrr {

/// Gray level of each entry: round(255 * |m_ij| / max |m|), row-major.
inline std::vector<std::uint8_t> heatmap_pixels(const Matrix& m) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(m.size()), 0);
  const double peak = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
  if (!(peak > 0.0)) return px;
  std::size_t k = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      px[k++] = static_cast<std::uint8_t>(std::lround(255.0 * std::abs(m(i, j)) / peak));
  return px;
}

/// Binary PGM (P5, maxval 255); width = columns, height = rows.
inline std::string encode_pgm(const Matrix& m) {
  const auto px = heatmap_pixels(m);
  std::string out = "P5\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  out.append(px.begin(), px.end());
  return out;
}

inline void write_heatmap(const Matrix& m, const std::filesystem::path& path) {
  auto out = detail::open_out(path, true);
  const auto bytes = encode_pgm(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace deeplrr
