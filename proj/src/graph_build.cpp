#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "retihemo/error.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

namespace {



bool adjacent8(Pixel a, Pixel b) {
  return a != b && std::abs(a.row - b.row) <= 1 && std::abs(a.col - b.col) <= 1;
}

// Undirected edge found while tracing, before cycle breaking.
struct RawEdge {
  int a = -1;
  int b = -1;
  std::vector<Pixel> pixels;  // walk order from a to b
  double mean_radius = 0.0;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

Pixel centroid_pixel(const std::vector<Pixel>& pixels) {
  double r = 0.0, c = 0.0;
  for (const auto& p : pixels) {
    r += p.row;
    c += p.col;
  }
  r /= pixels.size();
  c /= pixels.size();
  Pixel best = pixels.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : pixels) {
    const double d = (p.row - r) * (p.row - r) + (p.col - c) * (p.col - c);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinaryRaster& img, const Raster<int>& labels, int label, const Raster<double>& radii)
      : img_(img), labels_(labels), label_(label), radii_(radii),
        owner_(img.rows(), img.cols(), -1), edge_of_(img.rows(), img.cols(), -1) {}

  std::optional<Tree> build(Pixel root) {
    collect_pixels();
    make_vertices(root);
    trace_edges();
    return assemble();
  }

 private:
  bool fg(Pixel p) const { return img_.contains(p) && labels_[p] == label_; }

  int degree(Pixel p) const {
    int n = 0;
    for (const auto& d : kNeighbours8) n += fg({p.row + d.row, p.col + d.col});
    return n;
  }

  double radius(Pixel p) const {
    const double r = radii_[p];
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidCenterline, "centerline pixel without positive radius");
    return r;
  }

  void collect_pixels() {
    for (int r = 0; r < img_.rows(); ++r)
      for (int c = 0; c < img_.cols(); ++c)
        if (labels_(r, c) == label_) pixels_.push_back({r, c});
  }

  int add_vertex(VertexKind kind, std::vector<Pixel> owned, Pixel position) {
    Vertex v;
    v.kind = kind;
    v.pixels = std::move(owned);
    v.position = position;
    const int id = static_cast<int>(vertices_.size());
    for (const auto& p : v.pixels) owner_[p] = id;
    vertices_.push_back(std::move(v));
    return id;
  }

  // Groups branching pixels (>= 3 neighbours) into 8-connected clusters.
  std::vector<std::vector<Pixel>> branching_clusters() {
    Raster<std::uint8_t> seen(img_.rows(), img_.cols(), 0);
    std::vector<std::vector<Pixel>> clusters;
    for (const auto& p : pixels_) {
      if (seen[p] || degree(p) < 3) continue;
      std::vector<Pixel> cluster{p};
      seen[p] = 1;
      for (std::size_t i = 0; i < cluster.size(); ++i) {
        for (const auto& d : kNeighbours8) {
          const Pixel q{cluster[i].row + d.row, cluster[i].col + d.col};
          if (fg(q) && !seen[q] && degree(q) >= 3) {
            seen[q] = 1;
            cluster.push_back(q);
          }
        }
      }
      std::sort(cluster.begin(), cluster.end());
      clusters.push_back(std::move(cluster));
    }
    return clusters;
  }

  void make_vertices(Pixel root) {
    auto clusters = branching_clusters();
    auto cluster_of = [&](Pixel p) -> int {
      for (std::size_t i = 0; i < clusters.size(); ++i)
        if (std::binary_search(clusters[i].begin(), clusters[i].end(), p)) return static_cast<int>(i);
      return -1;
    };

    int root_cluster = cluster_of(root);
    std::vector<Pixel> root_owned;
    if (root_cluster < 0) {
      // A non-branching root touching a cluster is absorbed into it.
      for (const auto& d : kNeighbours8) {
        const int c = cluster_of({root.row + d.row, root.col + d.col});
        if (c >= 0) {
          root_cluster = c;
          break;
        }
      }
      if (root_cluster >= 0) {
        clusters[root_cluster].push_back(root);
        std::sort(clusters[root_cluster].begin(), clusters[root_cluster].end());
      }
    }

    if (root_cluster >= 0) {
      root_owned = clusters[root_cluster];
      add_vertex(VertexKind::Root, root_owned, root);
      vertices_[0].branching = true;
    } else if (degree(root) >= 2) {
      add_vertex(VertexKind::Root, {root}, root);
    } else {
      add_vertex(VertexKind::Root, {}, root);
      endpoint_root_ = true;
    }
    root_pixel_ = root;

    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (static_cast<int>(i) == root_cluster) continue;
      add_vertex(VertexKind::Bifurcation, clusters[i], centroid_pixel(clusters[i]));
    }
  }

  void walk(int from, Pixel first, std::optional<Pixel> prev) {
    RawEdge e;
    e.a = from;
    const int id = static_cast<int>(raw_.size());
    Pixel cur = first;
    e.pixels.push_back(cur);
    edge_of_[cur] = id;
    while (true) {
      std::optional<Pixel> next;
      for (const auto& d : kNeighbours8) {
        const Pixel q{cur.row + d.row, cur.col + d.col};
        if (!fg(q) || (prev && q == *prev) || edge_of_[q] == id) continue;
        next = q;
        break;
      }
      if (!next) {
        e.b = add_vertex(VertexKind::Terminal, {}, cur);
        break;
      }
      if (owner_[*next] >= 0) {
        e.b = owner_[*next];
        break;
      }
      if (edge_of_[*next] >= 0) {
        throw Error(ErrorCode::InvalidCenterline, "overlapping centerline chains");
      }
      prev = cur;
      cur = *next;
      e.pixels.push_back(cur);
      edge_of_[cur] = id;
    }
    double sum = 0.0;
    for (const auto& p : e.pixels) sum += radius(p);
    e.mean_radius = sum / e.pixels.size();
    raw_.push_back(std::move(e));
  }

  void trace_edges() {
    if (endpoint_root_ && degree(root_pixel_) == 1) walk(0, root_pixel_, std::nullopt);
    // Vertices may be appended (terminals) while iterating; they own nothing.
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      const auto owned = vertices_[v].pixels;
      for (const auto& p : owned) {
        for (const auto& d : kNeighbours8) {
          const Pixel q{p.row + d.row, p.col + d.col};
          if (fg(q) && owner_[q] < 0 && edge_of_[q] < 0) walk(static_cast<int>(v), q, p);
        }
      }
    }
  }

  std::optional<Tree> assemble() {
    // Maximum spanning forest by mean radius: on every cycle the thinnest
    // edge is dropped.
    std::vector<int> order(raw_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return raw_[x].mean_radius > raw_[y].mean_radius; });
    UnionFind uf(vertices_.size());
    std::vector<bool> keep(raw_.size(), false);
    for (int e : order)
      if (raw_[e].a != raw_[e].b && uf.unite(raw_[e].a, raw_[e].b)) keep[e] = true;

    std::vector<std::vector<int>> incident(vertices_.size());
    for (std::size_t e = 0; e < raw_.size(); ++e) {
      if (!keep[e]) continue;
      incident[raw_[e].a].push_back(static_cast<int>(e));
      incident[raw_[e].b].push_back(static_cast<int>(e));
    }

    Tree tree;
    std::vector<int> new_id(vertices_.size(), -1);
    std::deque<int> queue{0};
    new_id[0] = 0;
    tree.vertices.push_back(vertices_[0]);
    tree.root = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int e : incident[u]) {
        RawEdge& raw = raw_[e];
        const int w = raw.a == u ? raw.b : raw.a;
        if (new_id[w] >= 0) continue;
        new_id[w] = static_cast<int>(tree.vertices.size());
        tree.vertices.push_back(vertices_[w]);
        Edge edge;
        edge.parent = new_id[u];
        edge.child = new_id[w];
        edge.pixels = raw.pixels;
        if (raw.a != u) std::reverse(edge.pixels.begin(), edge.pixels.end());
        for (const auto& p : edge.pixels) edge.radii_cm.push_back(radius(p));
        const int eid = static_cast<int>(tree.edges.size());
        tree.vertices[edge.parent].child_edges.push_back(eid);
        tree.vertices[edge.child].parent_edge = eid;
        tree.edges.push_back(std::move(edge));
        queue.push_back(w);
      }
    }
    if (tree.edges.empty()) return std::nullopt;

    for (std::size_t v = 0; v < tree.vertices.size(); ++v) {
      Vertex& vx = tree.vertices[v];
      for (const auto& p : vx.pixels) vx.radii_cm.push_back(radius(p));
      if (static_cast<int>(v) == tree.root) continue;
      const auto children = vx.child_edges.size();
      vx.kind = children == 0 ? VertexKind::Terminal
                : children == 1 ? VertexKind::Connector
                                : VertexKind::Bifurcation;
    }
    return tree;
  }

  const BinaryRaster& img_;
  const Raster<int>& labels_;
  int label_;
  const Raster<double>& radii_;
  Raster<int> owner_;
  Raster<int> edge_of_;
  std::vector<Pixel> pixels_;
  std::vector<Vertex> vertices_;
  std::vector<RawEdge> raw_;
  Pixel root_pixel_;
  bool endpoint_root_ = false;
};

}  // namespace

bool OdEllipse::contains(double row, double col) const {
  const double theta = rotation_deg * std::numbers::pi / 180.0;
  const double dx = col - center_col;
  const double dy = row - center_row;
  const double u = dx * std::cos(theta) + dy * std::sin(theta);
  const double w = -dx * std::sin(theta) + dy * std::cos(theta);
  return (u / semi_axis_col) * (u / semi_axis_col) + (w / semi_axis_row) * (w / semi_axis_row) <= 1.0;
}

double OdEllipse::distance_to_center(Pixel p) const {
  return std::hypot(p.row - center_row, p.col - center_col);
}

void ArteryMask::validate() const {
  if (grid.empty() || count_foreground(grid) == 0)
    throw Error(ErrorCode::EmptyInput, "artery mask has no foreground pixels");
  if (!(pixel_pitch_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel pitch must be positive");
  if (!(od.semi_axis_row > 0.0) || !(od.semi_axis_col > 0.0))
    throw Error(ErrorCode::InvalidArgument, "optic disc semi-axes must be positive");
  if (od.center_row < 0 || od.center_col < 0 || od.center_row > grid.rows() - 1 ||
      od.center_col > grid.cols() - 1)
    throw Error(ErrorCode::InvalidArgument, "optic disc center outside the raster");
}

std::string_view to_string(VertexKind kind) {
  switch (kind) {
    case VertexKind::Root: return "root";
    case VertexKind::Bifurcation: return "bifurcation";
    case VertexKind::Terminal: return "terminal";
    case VertexKind::Connector: return "connector";
  }
  return "terminal";
}

std::optional<VertexKind> vertex_kind_from_string(std::string_view s) {
  if (s == "root") return VertexKind::Root;
  if (s == "bifurcation") return VertexKind::Bifurcation;
  if (s == "terminal") return VertexKind::Terminal;
  if (s == "connector") return VertexKind::Connector;
  return std::nullopt;
}

std::string_view to_string(GraphElementKind kind) {
  switch (kind) {
    case GraphElementKind::Terminal: return "terminal";
    case GraphElementKind::Bifurcation: return "bifurcation";
    case GraphElementKind::Segment: return "segment";
  }
  return "segment";
}

std::optional<GraphElementKind> graph_element_kind_from_string(std::string_view s) {
  if (s == "terminal") return GraphElementKind::Terminal;
  if (s == "bifurcation") return GraphElementKind::Bifurcation;
  if (s == "segment") return GraphElementKind::Segment;
  return std::nullopt;
}

double Edge::mean_radius() const {
  if (radii_cm.empty()) return 0.0;
  return std::accumulate(radii_cm.begin(), radii_cm.end(), 0.0) / radii_cm.size();
}

std::size_t CenterlineGraph::num_pixels() const {
  std::size_t n = 0;
  for (const auto& t : trees) {
    for (const auto& v : t.vertices) n += v.pixels.size();
    for (const auto& e : t.edges) n += e.pixels.size();
  }
  return n;
}

std::size_t CenterlineGraph::num_terminals() const {
  std::size_t n = 0;
  for (const auto& t : trees)
    for (const auto& v : t.vertices) n += v.kind == VertexKind::Terminal;
  return n;
}

PrunedCenterline prune_and_root(const BinaryRaster& centerline, const Raster<double>& radii,
                                const OdEllipse& od, std::size_t min_component_pixels) {
  if (!(od.semi_axis_row > 0.0) || !(od.semi_axis_col > 0.0))
    throw Error(ErrorCode::InvalidArgument, "optic disc semi-axes must be positive");
  if (radii.rows() != centerline.rows() || radii.cols() != centerline.cols())
    throw Error(ErrorCode::InvalidArgument, "radius raster dimensions differ");

  BinaryRaster pruned(centerline.rows(), centerline.cols(), 0);
  for (int r = 0; r < centerline.rows(); ++r)
    for (int c = 0; c < centerline.cols(); ++c)
      pruned(r, c) = centerline(r, c) && !od.contains(r, c);

  int n = 0;
  const Raster<int> labels = label_components(pruned, &n);
  std::vector<std::size_t> sizes(n + 1, 0);
  std::vector<Pixel> best(n + 1);
  std::vector<double> best_d(n + 1, std::numeric_limits<double>::infinity());
  for (int r = 0; r < pruned.rows(); ++r) {
    for (int c = 0; c < pruned.cols(); ++c) {
      const int l = labels(r, c);
      if (!l) continue;
      ++sizes[l];
      const double d = od.distance_to_center({r, c});
      if (d < best_d[l]) {
        best_d[l] = d;
        best[l] = {r, c};
      }
    }
  }

  PrunedCenterline out;
  out.raster = BinaryRaster(pruned.rows(), pruned.cols(), 0);
  for (int l = 1; l <= n; ++l) {
    if (sizes[l] < min_component_pixels) continue;
    out.roots.push_back(best[l]);
  }
  for (int r = 0; r < pruned.rows(); ++r)
    for (int c = 0; c < pruned.cols(); ++c) {
      const int l = labels(r, c);
      if (l && sizes[l] >= min_component_pixels) out.raster(r, c) = 1;
    }
  if (out.roots.empty()) throw Error(ErrorCode::NoArterialTree, "no centerline component survives pruning");
  return out;
}

CenterlineGraph build_graph(const BinaryRaster& pruned, const Raster<double>& radii,
                            const std::vector<Pixel>& roots, double pixel_pitch_cm) {
  if (!(pixel_pitch_cm > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel pitch must be positive");
  int n = 0;
  const Raster<int> labels = label_components(pruned, &n);
  std::vector<int> rooted(n + 1, 0);
  for (const auto& root : roots) {
    if (!pruned.contains(root) || !labels[root])
      throw Error(ErrorCode::RootMismatch, "root pixel not on any centerline component");
    if (rooted[labels[root]]++)
      throw Error(ErrorCode::RootMismatch, "component has more than one root");
  }

  CenterlineGraph graph;
  graph.rows = pruned.rows();
  graph.cols = pruned.cols();
  graph.pixel_pitch_cm = pixel_pitch_cm;
  for (const auto& root : roots) {
    TreeBuilder builder(pruned, labels, labels[root], radii);
    if (auto tree = builder.build(root)) graph.trees.push_back(std::move(*tree));
  }
  if (graph.trees.empty()) throw Error(ErrorCode::NoArterialTree, "no tree has an outlet");
  return graph;
}

CenterlineGraph extract_graph(const ArteryMask& mask) {
  mask.validate();
  const BinaryRaster skeleton = skeletonize(mask.grid);
  const Raster<double> radii = estimate_radii(mask, skeleton);
  const PrunedCenterline pruned = prune_and_root(skeleton, radii, mask.od);
  return build_graph(pruned.raster, radii, pruned.roots, mask.pixel_pitch_cm());
}

std::string check_graph(const CenterlineGraph& graph) {
  std::ostringstream err;
  std::set<Pixel> seen;
  auto claim = [&](Pixel p) {
    if (!seen.insert(p).second) err << "pixel (" << p.row << "," << p.col << ") claimed twice; ";
  };
  for (std::size_t t = 0; t < graph.trees.size(); ++t) {
    const Tree& tree = graph.trees[t];
    const auto nv = tree.vertices.size();
    if (tree.root < 0 || tree.root >= static_cast<int>(nv)) {
      err << "tree " << t << " has no valid root; ";
      continue;
    }
    if (tree.edges.size() + 1 != nv) err << "tree " << t << " violates |E| = |V| - 1; ";
    int roots = 0;
    for (std::size_t v = 0; v < nv; ++v) {
      const Vertex& vx = tree.vertices[v];
      roots += vx.kind == VertexKind::Root;
      if ((vx.kind == VertexKind::Root) != (static_cast<int>(v) == tree.root))
        err << "tree " << t << " root kind mismatch; ";
      if (static_cast<int>(v) != tree.root && vx.parent_edge < 0)
        err << "tree " << t << " vertex " << v << " has no parent; ";
      for (const auto& p : vx.pixels) claim(p);
      for (double r : vx.radii_cm)
        if (!(r > 0.0)) err << "non-positive vertex radius; ";
      // Following parent links must reach the root.
      int cur = static_cast<int>(v);
      std::size_t steps = 0;
      while (cur != tree.root && steps++ <= nv) {
        const int pe = tree.vertices[cur].parent_edge;
        if (pe < 0 || pe >= static_cast<int>(tree.edges.size())) break;
        cur = tree.edges[pe].parent;
      }
      if (cur != tree.root) err << "tree " << t << " vertex " << v << " does not reach the root; ";
    }
    if (roots != 1) err << "tree " << t << " has " << roots << " roots; ";
    for (std::size_t e = 0; e < tree.edges.size(); ++e) {
      const Edge& edge = tree.edges[e];
      if (edge.pixels.empty()) err << "tree " << t << " edge " << e << " is empty; ";
      if (edge.pixels.size() != edge.radii_cm.size()) err << "edge radii size mismatch; ";
      if (edge.parent == edge.child) err << "self loop; ";
      for (std::size_t i = 0; i < edge.pixels.size(); ++i) {
        claim(edge.pixels[i]);
        if (i > 0 && !adjacent8(edge.pixels[i - 1], edge.pixels[i]))
          err << "tree " << t << " edge " << e << " chain not 8-connected; ";
        if (!(edge.radii_cm[i] > 0.0)) err << "non-positive edge radius; ";
      }
    }
  }
  return err.str();
}

}  // namespace retihemo
