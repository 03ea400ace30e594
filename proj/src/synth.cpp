#include "retihemo/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "retihemo/error.hpp"
#include "retihemo/random.hpp"

namespace retihemo {

namespace {

class TreeGrower {
 public:
  TreeGrower(const SynthSpec& spec, Tree& tree) : spec_(spec), tree_(tree), rng_(spec.seed) {
    h_leaf_ = std::max(2, static_cast<int>(std::lround(spec.length_per_segment_cm / (spec.pixel_pitch_cm * std::sqrt(2.0)))));
  }

  int offset(int level) const { return h_leaf_ << (spec_.depth - level); }
  int leaf_offset() const { return h_leaf_; }

  // Adds the subtree hanging below bifurcation vertex `v` at `level`.
  void grow(int v, int level, double parent_radius) {
    const Pixel b = tree_.vertices[v].position;
    double ratio = spec_.asymmetry;
    if (spec_.random_asymmetry) ratio = uniform(rng_, spec_.asymmetry, 1.0);
    const double g = spec_.murray_gamma;
    const double r_large = parent_radius / std::pow(1.0 + std::pow(ratio, g), 1.0 / g);
    const double r_small = ratio * r_large;
    const bool large_up = !spec_.random_asymmetry || uniform01(rng_) < 0.5;
    const int h = offset(level);
    for (int s : {-1, 1}) {
      const double r = (s < 0) == large_up ? r_large : r_small;
      if (r < spec_.pixel_pitch_cm) throw Error(ErrorCode::DepthTooLarge, "radius fell below one pixel");
      const bool leaf = level == spec_.depth;
      Edge e;
      e.parent = v;
      const int last = leaf ? h : h - 1;
      for (int i = 1; i <= last; ++i) e.pixels.push_back({b.row + s * i, b.col + i});
      e.radii_cm.assign(e.pixels.size(), r);
      Vertex child;
      child.kind = leaf ? VertexKind::Terminal : VertexKind::Bifurcation;
      child.position = {b.row + s * h, b.col + h};
      if (!leaf) {
        child.pixels = {child.position};
        child.radii_cm = {r};
      }
      const int c = add(std::move(child), std::move(e));
      if (!leaf) grow(c, level + 1, r);
    }
  }

  int add(Vertex child, Edge e) {
    const int c = static_cast<int>(tree_.vertices.size());
    const int ei = static_cast<int>(tree_.edges.size());
    e.child = c;
    child.parent_edge = ei;
    tree_.vertices[e.parent].child_edges.push_back(ei);
    tree_.vertices.push_back(std::move(child));
    tree_.edges.push_back(std::move(e));
    return c;
  }

 private:
  const SynthSpec& spec_;
  Tree& tree_;
  std::mt19937_64 rng_;
  int h_leaf_ = 2;
};

void stamp_disc(BinaryRaster& grid, Pixel c, double radius_px) {
  const int reach = static_cast<int>(std::ceil(radius_px));
  const double r2 = radius_px * radius_px;
  for (int dr = -reach; dr <= reach; ++dr)
    for (int dc = -reach; dc <= reach; ++dc)
      if (dr * dr + dc * dc < r2 && grid.contains(c.row + dr, c.col + dc)) grid(c.row + dr, c.col + dc) = 1;
}

}  // namespace

void SynthSpec::validate() const {
  if (depth < 0 || depth > 20) throw Error(ErrorCode::InvalidArgument, "depth must lie in [0, 20]");
  if (!(root_radius_cm > 0) || !(murray_gamma > 0) || !(length_per_segment_cm > 0) || !(pixel_pitch_cm > 0))
    throw Error(ErrorCode::InvalidArgument, "radius, exponent, length and pitch must be positive");
  if (!(asymmetry > 0) || asymmetry > 1) throw Error(ErrorCode::InvalidArgument, "asymmetry must lie in (0, 1]");
}

CenterlineGraph generate_tree(const SynthSpec& spec) {
  spec.validate();
  const double pitch = spec.pixel_pitch_cm;
  if (spec.root_radius_cm < pitch) throw Error(ErrorCode::DepthTooLarge, "root radius below one pixel");

  CenterlineGraph graph;
  graph.pixel_pitch_cm = pitch;
  graph.trees.emplace_back();
  Tree& tree = graph.trees.back();
  TreeGrower grower(spec, tree);

  const int root_len = std::max(2, static_cast<int>(std::lround(spec.length_per_segment_cm / pitch)));
  const int spread = spec.depth == 0 ? 0 : grower.leaf_offset() * ((1 << spec.depth) - 1);
  const int margin = static_cast<int>(std::ceil(spec.root_radius_cm / pitch)) + 4;
  const Pixel root{margin + spread, margin};
  graph.rows = 2 * root.row + 1;
  graph.cols = root.col + root_len + spread + margin + 1;

  Vertex r;
  r.kind = VertexKind::Root;
  r.position = root;
  tree.vertices.push_back(r);
  tree.root = 0;

  Edge e;
  e.parent = 0;
  for (int i = 0; i < root_len; ++i) e.pixels.push_back({root.row, root.col + i});
  e.radii_cm.assign(e.pixels.size(), spec.root_radius_cm);
  Vertex first;
  if (spec.depth == 0) {
    first.kind = VertexKind::Terminal;
    first.position = e.pixels.back();
  } else {
    first.kind = VertexKind::Bifurcation;
    first.position = {root.row, root.col + root_len};
    first.pixels = {first.position};
    first.radii_cm = {spec.root_radius_cm};
  }
  const int v = grower.add(std::move(first), std::move(e));
  if (spec.depth > 0) grower.grow(v, 1, spec.root_radius_cm);
  return graph;
}

ArteryMask rasterize(const CenterlineGraph& graph) {
  if (graph.trees.empty()) throw Error(ErrorCode::EmptyInput, "graph has no trees");
  ArteryMask mask;
  mask.grid = BinaryRaster(graph.rows, graph.cols, 0);
  mask.pixel_pitch_um = graph.pixel_pitch_cm * 1e4;
  const double pitch = graph.pixel_pitch_cm;
  for (const Tree& tree : graph.trees) {
    for (const Edge& e : tree.edges)
      for (std::size_t i = 0; i < e.pixels.size(); ++i) stamp_disc(mask.grid, e.pixels[i], e.radii_cm[i] / pitch);
    for (const Vertex& v : tree.vertices)
      for (std::size_t i = 0; i < v.pixels.size(); ++i) stamp_disc(mask.grid, v.pixels[i], v.radii_cm[i] / pitch);
  }
  const Tree& first = graph.trees.front();
  const Vertex& root = first.vertices[first.root];
  const double root_r = first.edges[root.child_edges.front()].radii_cm.front() / pitch;
  mask.od.center_row = root.position.row;
  mask.od.center_col = root.position.col;
  mask.od.semi_axis_row = root_r + 2;
  mask.od.semi_axis_col = root_r + 2;
  return mask;
}

SynthSpec random_spec(std::uint64_t seed, int max_depth) {
  std::mt19937_64 rng(derive_seed(seed, 0x5EC));
  SynthSpec s;
  s.seed = seed;
  s.depth = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_depth) + 1));
  s.asymmetry = uniform(rng, 0.7, 1.0);
  s.random_asymmetry = true;
  s.murray_gamma = uniform(rng, 2.5, 3.0);
  s.length_per_segment_cm = uniform(rng, 0.02, 0.04);
  const double a = s.asymmetry;
  const double worst = a / std::pow(1.0 + std::pow(a, s.murray_gamma), 1.0 / s.murray_gamma);
  s.root_radius_cm = std::max(60e-4, 1.01 * s.pixel_pitch_cm / std::pow(worst, s.depth));
  return s;
}

std::vector<SyntheticSubject> generate_cohort_subjects(int n_per_class, std::array<double, 2> class_flow_scales,
                                                       std::uint64_t seed) {
  if (n_per_class < 1) throw Error(ErrorCode::InvalidArgument, "need at least one subject per class");
  std::vector<SyntheticSubject> out;
  for (int i = 0; i < 2 * n_per_class; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    SyntheticSubject s;
    s.patient.label = i < n_per_class ? -1 : 1;
    char id[32];
    std::snprintf(id, sizeof id, "syn%03d", i);
    s.patient.subject_id = id;
    s.patient.age = std::round(uniform(rng, 40.0, 80.0));
    s.patient.sex = uniform01(rng) < 0.5 ? "M" : "F";
    s.spec.seed = rng();
    s.spec.depth = 2 + static_cast<int>(uniform_index(rng, 2));
    s.spec.asymmetry = 0.75;
    s.spec.random_asymmetry = true;
    s.spec.root_radius_cm = uniform(rng, 50e-4, 70e-4);
    s.spec.length_per_segment_cm = uniform(rng, 0.025, 0.035);
    s.graph = generate_tree(s.spec);
    s.qt_ul_min = class_flow_scales[s.patient.label > 0 ? 1 : 0];
    out.push_back(std::move(s));
  }
  return out;
}

FeatureSet solve_subject(const SyntheticSubject& subject) {
  ScenarioParams params = *ScenarioParams::preset("sc2");
  params.qt_ul_min = subject.qt_ul_min;
  FeatureSet f = summarize(simulate(subject.graph, params), subject.graph);
  f.subject_id = subject.patient.subject_id;
  f.label = subject.patient.label;
  return f;
}

std::vector<FeatureSet> generate_cohort(int n_per_class, std::array<double, 2> class_flow_scales,
                                        std::uint64_t seed) {
  std::vector<FeatureSet> out;
  for (const auto& s : generate_cohort_subjects(n_per_class, class_flow_scales, seed)) out.push_back(solve_subject(s));
  return out;
}

}  // namespace retihemo
