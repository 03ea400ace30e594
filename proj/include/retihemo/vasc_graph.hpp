#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "retihemo/raster.hpp"

namespace retihemo {

/// Optic-disc ellipse in pixel units. `semi_axis_col` lies along the column
/// axis before rotation; `rotation_deg` rotates counter-clockwise in image
/// coordinates (col right, row down).
struct OdEllipse {
  double center_row = 0.0;
  double center_col = 0.0;
  double semi_axis_row = 1.0;
  double semi_axis_col = 1.0;
  double rotation_deg = 0.0;

  bool contains(double row, double col) const;
  double distance_to_center(Pixel p) const;
};

struct ArteryMask {
  BinaryRaster grid;
  OdEllipse od;
  double pixel_pitch_um = 6.0;

  /// Throws EmptyInput or InvalidArgument when an invariant is violated.
  void validate() const;
  double pixel_pitch_cm() const { return pixel_pitch_um * 1e-4; }
};

/// Classes of graph elements summarised by the feature encoder.
enum class GraphElementKind { Terminal, Bifurcation, Segment };

std::string_view to_string(GraphElementKind kind);
std::optional<GraphElementKind> graph_element_kind_from_string(std::string_view s);

enum class VertexKind { Root, Bifurcation, Terminal, Connector };

std::string_view to_string(VertexKind kind);
std::optional<VertexKind> vertex_kind_from_string(std::string_view s);

/// A graph vertex. Bifurcations, connectors and branching roots own the
/// pixels of their cluster; an endpoint root or terminal owns nothing and
/// refers to the first/last pixel of its edge.
struct Vertex {
  VertexKind kind = VertexKind::Terminal;
  Pixel position;
  std::vector<Pixel> pixels;
  std::vector<double> radii_cm;
  int parent_edge = -1;
  std::vector<int> child_edges;
  bool branching = false;  // root built from branching pixels
};

/// Pixel chain oriented parent -> child.
struct Edge {
  int parent = -1;
  int child = -1;
  std::vector<Pixel> pixels;
  std::vector<double> radii_cm;

  double mean_radius() const;
};

struct Tree {
  int root = -1;  // index into vertices
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
};

struct CenterlineGraph {
  int rows = 0;
  int cols = 0;
  double pixel_pitch_cm = 6e-4;
  std::vector<Tree> trees;

  std::size_t num_pixels() const;
  std::size_t num_terminals() const;
};

/// Topology-preserving thinning to a 1-px 8-connected centreline.
BinaryRaster skeletonize(const BinaryRaster& mask);
BinaryRaster skeletonize(const ArteryMask& mask);

/// Exact squared Euclidean distance (in pixels^2) from every pixel to the
/// nearest background pixel; pixels outside the raster count as background.
Raster<double> squared_distance_transform(const BinaryRaster& mask);

/// Distance to the nearest background pixel for each centreline pixel, in cm.
/// Zero for non-centreline pixels.
Raster<double> estimate_radii(const ArteryMask& mask, const BinaryRaster& centerline);

struct PrunedCenterline {
  BinaryRaster raster;
  std::vector<Pixel> roots;  // one per retained component, in label order
};

inline constexpr std::size_t kMinComponentPixels = 10;

PrunedCenterline prune_and_root(const BinaryRaster& centerline, const Raster<double>& radii,
                                const OdEllipse& od,
                                std::size_t min_component_pixels = kMinComponentPixels);

CenterlineGraph build_graph(const BinaryRaster& pruned, const Raster<double>& radii,
                            const std::vector<Pixel>& roots, double pixel_pitch_cm);

/// Full extraction: skeletonize, radii, prune, build.
CenterlineGraph extract_graph(const ArteryMask& mask);

/// Structural checks; returns an empty string when the graph is consistent,
/// otherwise a description of the first violation.
std::string check_graph(const CenterlineGraph& graph);

}  // namespace retihemo
