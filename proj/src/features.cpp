#include <map>
#include <set>
#include <tuple>

#include "retihemo/bohf.hpp"
#include "retihemo/error.hpp"

namespace retihemo {

HemoVector hemo_vector(const PixelState& s) {
  return {s.q_ul_min, s.p_mmhg, s.v_cm_s, s.r_mmhg_min_ul, s.reynolds, s.wss_dyn_cm2};
}

FeatureSet summarize(const HemodynamicSolution& solution) {
  struct Accumulator {
    HemoVector sum{};
    double radius = 0.0;
    std::size_t count = 0;
  };
  using Key = std::pair<int, int>;
  std::map<Key, Accumulator> segments;
  std::map<Key, const PixelState*> bifurcations;
  std::map<Key, const PixelState*> terminals;

  for (const PixelState& s : solution.pixels) {
    if (s.edge >= 0) {
      auto& acc = segments[{s.tree, s.edge}];
      const HemoVector f = hemo_vector(s);
      for (int d = 0; d < kHemoDims; ++d) acc.sum[d] += f[d];
      acc.radius += s.r_cm;
      ++acc.count;
    }
    if (s.kind == PixelKind::Bifurcation) bifurcations.try_emplace({s.tree, s.vertex}, &s);
    if (s.kind == PixelKind::Terminal) terminals.try_emplace({s.tree, s.vertex}, &s);
  }

  FeatureSet out;
  for (const auto& [key, acc] : segments) {
    FeatureElement e;
    e.kind = GraphElementKind::Segment;
    for (int d = 0; d < kHemoDims; ++d) e.values[d] = acc.sum[d] / acc.count;
    e.radius_cm = acc.radius / acc.count;
    out.elements.push_back(e);
  }
  for (const auto& [key, s] : bifurcations)
    out.elements.push_back({GraphElementKind::Bifurcation, hemo_vector(*s), s->r_cm});
  for (const auto& [key, s] : terminals)
    out.elements.push_back({GraphElementKind::Terminal, hemo_vector(*s), s->r_cm});
  return out;
}

FeatureSet summarize(const HemodynamicSolution& solution, const CenterlineGraph& graph) {
  std::set<std::tuple<int, int, int>> covered;
  for (const PixelState& s : solution.pixels) covered.insert({s.tree, s.pixel.row, s.pixel.col});
  std::size_t expected_elements = 0;
  for (std::size_t t = 0; t < graph.trees.size(); ++t) {
    const Tree& tree = graph.trees[t];
    auto require = [&](Pixel p) {
      if (!covered.count({static_cast<int>(t), p.row, p.col}))
        throw Error(ErrorCode::IncompleteSolution, "pixel without a solution value");
    };
    for (const Edge& e : tree.edges)
      for (const Pixel& p : e.pixels) require(p);
    for (const Vertex& v : tree.vertices) {
      for (const Pixel& p : v.pixels) require(p);
      expected_elements += v.kind == VertexKind::Terminal || v.kind == VertexKind::Bifurcation ||
                           (v.kind == VertexKind::Root && v.branching);
    }
    expected_elements += tree.edges.size();
  }
  FeatureSet out = summarize(solution);
  if (out.elements.size() != expected_elements)
    throw Error(ErrorCode::IncompleteSolution, "solution does not match the graph topology");
  return out;
}

}  // namespace retihemo
