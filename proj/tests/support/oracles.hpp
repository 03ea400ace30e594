#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's numerical code; they re-derive results the slow way.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "retihemo/raster.hpp"
#include "retihemo/vasc_graph.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

/// Squared distance to the nearest background pixel by exhaustive scan. The
/// one-pixel frame around the raster counts as background.
inline retihemo::Raster<double> brute_force_sq_edt(const retihemo::BinaryRaster& mask) {
  std::vector<std::pair<int, int>> background;
  for (int r = -1; r <= mask.rows(); ++r)
    for (int c = -1; c <= mask.cols(); ++c)
      if (!mask.contains(r, c) || !mask(r, c)) background.emplace_back(r, c);
  retihemo::Raster<double> out(mask.rows(), mask.cols(), 0.0);
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (auto [br, bc] : background) best = std::min(best, double((r - br) * (r - br) + (c - bc) * (c - bc)));
      out(r, c) = best;
    }
  return out;
}

/// Blood viscosity (poise) from the in-vitro law, written out independently.
inline double blood_viscosity(double radius_cm, double plasma = 0.012) {
  const double d = 2.0 * radius_cm * 10000.0;
  return plasma * (220.0 * std::exp(-1.3 * d) + 3.2 - 2.44 * std::exp(-0.06 * std::pow(d, 0.645)));
}

/// Poiseuille resistance in mmHg min / ul.
inline double poiseuille_mmhg_min_ul(double mu, double length_cm, double radius_cm) {
  const double cgs = 8.0 * mu * length_cm / (kPi * std::pow(radius_cm, 4));  // dyn s / cm^5
  return cgs * (1.0 / 60000.0) / 1333.22;
}

struct NodeValue {
  double p = 0.0;
  double q = 0.0;
};

/// Tree traversal reference: outlet flows from the power law, flows
/// accumulated bottom-up, pressures propagated top-down element by element.
/// Result indexed [tree][edge][pixel].
inline std::vector<std::vector<std::vector<NodeValue>>> tree_traversal(const retihemo::CenterlineGraph& g, double p0,
                                                                       double qt, double gamma,
                                                                       double plasma = 0.012) {
  using namespace retihemo;
  double weight_sum = 0.0;
  for (const Tree& t : g.trees)
    for (const Vertex& v : t.vertices)
      if (v.kind == VertexKind::Terminal) weight_sum += std::pow(t.edges[v.parent_edge].radii_cm.back(), gamma);

  std::vector<std::vector<std::vector<NodeValue>>> out(g.trees.size());
  for (std::size_t ti = 0; ti < g.trees.size(); ++ti) {
    const Tree& t = g.trees[ti];
    std::vector<double> edge_flow(t.edges.size(), -1.0);
    // Bottom-up: recursion on the child vertex of each edge.
    std::function<double(int)> flow = [&](int e) -> double {
      if (edge_flow[e] >= 0) return edge_flow[e];
      const Vertex& child = t.vertices[t.edges[e].child];
      double q = 0.0;
      if (child.kind == VertexKind::Terminal)
        q = qt * std::pow(t.edges[e].radii_cm.back(), gamma) / weight_sum;
      else
        for (int ce : child.child_edges) q += flow(ce);
      return edge_flow[e] = q;
    };
    out[ti].resize(t.edges.size());
    // Top-down from the root's edges.
    std::function<void(int, double)> descend = [&](int e, double p_in) {
      const Edge& edge = t.edges[e];
      const double q = flow(e);
      auto& nodes = out[ti][e];
      nodes.resize(edge.pixels.size());
      double p = p_in;
      for (std::size_t i = 0; i < edge.pixels.size(); ++i) {
        if (i > 0) {
          const double len = std::hypot(edge.pixels[i].row - edge.pixels[i - 1].row,
                                        edge.pixels[i].col - edge.pixels[i - 1].col) *
                             g.pixel_pitch_cm;
          const double r = 0.5 * (edge.radii_cm[i] + edge.radii_cm[i - 1]);
          p -= poiseuille_mmhg_min_ul(blood_viscosity(r, plasma), len, r) * q;
        }
        nodes[i] = {p, q};
      }
      for (int ce : t.vertices[edge.child].child_edges) descend(ce, p);
    };
    for (int ce : t.vertices[t.root].child_edges) descend(ce, p0);
  }
  return out;
}

}  // namespace oracle
