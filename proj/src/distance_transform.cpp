#include <cmath>
#include <limits>
#include <vector>

#include "retihemo/error.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

namespace {

constexpr double kInf = 1e20;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), exact squared
// distance along one line.
void edt_1d(const std::vector<double>& f, std::vector<double>& out) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  const auto intersect = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  out.assign(n, 0.0);
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace

Raster<double> squared_distance_transform(const BinaryRaster& mask) {
  // Pad by one so the raster border acts as background.
  const int rows = mask.rows() + 2;
  const int cols = mask.cols() + 2;
  Raster<double> grid(rows, cols, 0.0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) grid(r + 1, c + 1) = mask(r, c) ? kInf : 0.0;

  std::vector<double> line, out;
  for (int c = 0; c < cols; ++c) {
    line.resize(rows);
    for (int r = 0; r < rows; ++r) line[r] = grid(r, c);
    edt_1d(line, out);
    for (int r = 0; r < rows; ++r) grid(r, c) = out[r];
  }
  for (int r = 0; r < rows; ++r) {
    line.resize(cols);
    for (int c = 0; c < cols; ++c) line[c] = grid(r, c);
    edt_1d(line, out);
    for (int c = 0; c < cols; ++c) grid(r, c) = out[c];
  }

  Raster<double> result(mask.rows(), mask.cols(), 0.0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) result(r, c) = grid(r + 1, c + 1);
  return result;
}

Raster<double> estimate_radii(const ArteryMask& mask, const BinaryRaster& centerline) {
  mask.validate();
  if (centerline.rows() != mask.grid.rows() || centerline.cols() != mask.grid.cols())
    throw Error(ErrorCode::InvalidCenterline, "centerline and mask dimensions differ");
  const Raster<double> sq = squared_distance_transform(mask.grid);
  const double pitch = mask.pixel_pitch_cm();
  Raster<double> radii(mask.grid.rows(), mask.grid.cols(), 0.0);
  for (int r = 0; r < centerline.rows(); ++r) {
    for (int c = 0; c < centerline.cols(); ++c) {
      if (!centerline(r, c)) continue;
      if (!mask.grid(r, c))
        throw Error(ErrorCode::InvalidCenterline, "centerline pixel on background");
      radii(r, c) = std::sqrt(sq(r, c)) * pitch;
    }
  }
  return radii;
}

}  // namespace retihemo
