#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "retihemo/error.hpp"
#include "retihemo/pipeline.hpp"

namespace retihemo {

OverlayField overlay_field_from_string(std::string_view s) {
  if (s == "P") return OverlayField::P;
  if (s == "Q") return OverlayField::Q;
  if (s == "v") return OverlayField::v;
  if (s == "Re") return OverlayField::Re;
  if (s == "WSS") return OverlayField::WSS;
  if (s == "R") return OverlayField::R;
  throw Error(ErrorCode::InvalidField, "unknown overlay field '" + std::string(s) + "'");
}

std::string_view to_string(OverlayField field) {
  switch (field) {
    case OverlayField::P: return "P";
    case OverlayField::Q: return "Q";
    case OverlayField::v: return "v";
    case OverlayField::Re: return "Re";
    case OverlayField::WSS: return "WSS";
    case OverlayField::R: return "R";
  }
  return "P";
}

double field_value(const PixelState& s, OverlayField field) {
  switch (field) {
    case OverlayField::P: return s.p_mmhg;
    case OverlayField::Q: return s.q_ul_min;
    case OverlayField::v: return s.v_cm_s;
    case OverlayField::Re: return s.reynolds;
    case OverlayField::WSS: return s.wss_dyn_cm2;
    case OverlayField::R: return s.r_mmhg_min_ul;
  }
  return 0.0;
}

Rgb colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {0, 0, 255},
      {0, 255, 255},
      {0, 255, 0},
      {255, 255, 0},
      {255, 0, 0},
  }};
  if (!(t > 0)) t = 0;  // also catches NaN
  t = std::min(t, 1.0);
  const double x = t * 4.0;
  const int i = std::min(3, static_cast<int>(x));
  const double f = x - i;
  auto mix = [&](int c) {
    return static_cast<std::uint8_t>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
  };
  return {mix(0), mix(1), mix(2)};
}

Raster<Rgb> render_overlay(const ArteryMask& mask, const CenterlineGraph& graph, const HemodynamicSolution& solution,
                           OverlayField field) {
  Raster<Rgb> img(mask.grid.rows(), mask.grid.cols(), kOverlayBackground);
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c)
      if (mask.grid(r, c)) img(r, c) = kOverlayVessel;

  std::map<std::pair<int, int>, double> values;
  for (const PixelState& s : solution.pixels) values.try_emplace({s.pixel.row, s.pixel.col}, field_value(s, field));
  std::vector<std::pair<Pixel, double>> centerline;
  auto add = [&](Pixel p) {
    auto it = values.find({p.row, p.col});
    if (it == values.end()) throw Error(ErrorCode::IncompleteSolution, "graph pixel without a solution value");
    centerline.emplace_back(p, it->second);
  };
  for (const Tree& tree : graph.trees) {
    for (const Edge& e : tree.edges)
      for (Pixel p : e.pixels) add(p);
    for (const Vertex& v : tree.vertices)
      for (Pixel p : v.pixels) add(p);
  }
  if (centerline.empty()) return img;

  double lo = centerline.front().second, hi = lo;
  for (const auto& [p, v] : centerline) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (const auto& [p, v] : centerline) {
    if (!img.contains(p.row, p.col)) continue;
    img(p.row, p.col) = colormap(hi > lo ? (v - lo) / (hi - lo) : 0.5);
  }
  return img;
}

}  // namespace retihemo
