#include <gtest/gtest.h>

#include <random>

#include "retihemo/error.hpp"
#include "retihemo/io.hpp"
#include "retihemo/synth.hpp"
#include "retihemo/vasc_graph.hpp"
#include "support/oracles.hpp"
#include "support/shapes.hpp"

using namespace retihemo;

namespace {

ArteryMask make_mask(int rows, int cols, OdEllipse od) {
  ArteryMask m;
  m.grid = BinaryRaster(rows, cols, 0);
  m.od = od;
  return m;
}

int count_kind(const Tree& t, VertexKind k) {
  int n = 0;
  for (const auto& v : t.vertices) n += v.kind == k;
  return n;
}

bool is_thin(const BinaryRaster& s) {
  // No pixel of a 1-px line has a fully set 2x2 block.
  for (int r = 0; r + 1 < s.rows(); ++r)
    for (int c = 0; c + 1 < s.cols(); ++c)
      if (s(r, c) && s(r + 1, c) && s(r, c + 1) && s(r + 1, c + 1)) return false;
  return true;
}

BinaryRaster random_strokes(std::mt19937& rng, int rows, int cols, int strokes) {
  BinaryRaster m(rows, cols, 0);
  std::uniform_real_distribution<double> R(4, rows - 4), C(4, cols - 4), W(1.0, 3.5);
  for (int i = 0; i < strokes; ++i) shapes::thick_line(m, R(rng), C(rng), R(rng), C(rng), W(rng));
  return m;
}

}  // namespace

TEST(Skeleton, BarThinsToSingleLine) {
  BinaryRaster bar(15, 50, 0);
  shapes::fill_rect(bar, 4, 5, 11, 45);
  const BinaryRaster s = skeletonize(bar);
  int components = 0;
  label_components(s, &components);
  EXPECT_EQ(components, 1);
  EXPECT_TRUE(is_thin(s));
  for (int r = 0; r < s.rows(); ++r)
    for (int c = 0; c < s.cols(); ++c)
      if (s(r, c)) {
        EXPECT_TRUE(bar(r, c));
        EXPECT_LE(count_neighbours(s, {r, c}), 2);
      }
}

TEST(Skeleton, Idempotent) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const BinaryRaster m = random_strokes(rng, 60, 60, 4);
    const BinaryRaster s = skeletonize(m);
    EXPECT_EQ(skeletonize(s), s) << "trial " << trial;
  }
}

TEST(Skeleton, PreservesComponentsAndStaysInsideMask) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryRaster m = random_strokes(rng, 70, 70, 3);
    const BinaryRaster s = skeletonize(m);
    int before = 0, after = 0;
    label_components(m, &before);
    label_components(s, &after);
    EXPECT_EQ(before, after) << "trial " << trial;
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c)
        if (s(r, c)) ASSERT_TRUE(m(r, c));
  }
}

TEST(Skeleton, EmptyMaskThrows) {
  BinaryRaster m(10, 10, 0);
  try {
    skeletonize(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(DistanceTransform, MatchesBruteForceScan) {
  std::mt19937 rng(3);
  std::bernoulli_distribution coin(0.75);
  for (int trial = 0; trial < 25; ++trial) {
    const int rows = 3 + trial % 9, cols = 4 + (trial * 7) % 13;
    BinaryRaster m(rows, cols, 0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = coin(rng);
    const auto fast = squared_distance_transform(m);
    const auto slow = oracle::brute_force_sq_edt(m);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) ASSERT_EQ(fast(r, c), slow(r, c)) << r << "," << c;
  }
}

TEST(DistanceTransform, SevenPixelBarCentre) {
  ArteryMask m = make_mask(21, 40, shapes::circle(10, 0, 2));
  shapes::fill_rect(m.grid, 7, 0, 14, 40);
  BinaryRaster line(21, 40, 0);
  for (int c = 5; c < 35; ++c) line(10, c) = 1;
  const auto radii = estimate_radii(m, line);
  // Nearest background is four rows away: 4 * 6 um.
  EXPECT_NEAR(radii(10, 20), 2.4e-3, 1e-15);
}

TEST(DistanceTransform, DiscRadiusWithinOnePixel) {
  ArteryMask m = make_mask(41, 41, shapes::circle(0, 0, 1));
  shapes::fill_disc(m.grid, 20, 20, 10);
  BinaryRaster centre(41, 41, 0);
  centre(20, 20) = 1;
  const auto radii = estimate_radii(m, centre);
  EXPECT_NEAR(radii(20, 20), 10 * 6e-4, 6e-4);
}

TEST(DistanceTransform, BoundaryPixelIsOnePitch) {
  ArteryMask m = make_mask(10, 10, shapes::circle(0, 0, 1));
  shapes::fill_rect(m.grid, 2, 2, 8, 8);
  BinaryRaster line(10, 10, 0);
  line(2, 5) = 1;
  EXPECT_NEAR(estimate_radii(m, line)(2, 5), 6e-4, 1e-15);
}

TEST(DistanceTransform, RadiiNeverShrinkUnderDilation) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    ArteryMask m = make_mask(60, 60, shapes::circle(0, 0, 1));
    m.grid = random_strokes(rng, 60, 60, 3);
    const BinaryRaster s = skeletonize(m.grid);
    ArteryMask dilated = m;
    for (int r = 0; r < 60; ++r)
      for (int c = 0; c < 60; ++c)
        if (m.grid(r, c))
          for (const auto& [dr, dc] : kNeighbours8)
            if (dilated.grid.contains(r + dr, c + dc)) dilated.grid(r + dr, c + dc) = 1;
    const auto before = estimate_radii(m, s);
    const auto after = estimate_radii(dilated, s);
    for (int r = 0; r < 60; ++r)
      for (int c = 0; c < 60; ++c) ASSERT_GE(after(r, c), before(r, c));
  }
}

TEST(DistanceTransform, CentrelineOffMaskThrows) {
  ArteryMask m = make_mask(10, 10, shapes::circle(0, 0, 1));
  shapes::fill_rect(m.grid, 2, 2, 8, 8);
  BinaryRaster line(10, 10, 0);
  line(0, 0) = 1;
  try {
    estimate_radii(m, line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidCenterline);
  }
}

TEST(Prune, RemovesDiscPixelsAndSmallComponents) {
  BinaryRaster line(20, 60, 0);
  for (int c = 0; c < 50; ++c) line(5, c) = 1;
  for (int c = 30; c < 36; ++c) line(15, c) = 1;  // 6 px, below the minimum
  Raster<double> radii(20, 60, 6e-4);
  const auto pruned = prune_and_root(line, radii, shapes::circle(5, 0, 10.5));
  ASSERT_EQ(pruned.roots.size(), 1u);
  EXPECT_EQ(pruned.roots[0], (Pixel{5, 11}));
  for (int c = 0; c <= 10; ++c) EXPECT_FALSE(pruned.raster(5, c));
  for (int c = 30; c < 36; ++c) EXPECT_FALSE(pruned.raster(15, c));
}

TEST(Prune, EverythingInsideDiscThrows) {
  BinaryRaster line(20, 20, 0);
  for (int c = 2; c < 18; ++c) line(10, c) = 1;
  Raster<double> radii(20, 20, 6e-4);
  try {
    prune_and_root(line, radii, shapes::circle(10, 10, 30));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoArterialTree);
  }
}

TEST(BuildGraph, RootOffCentrelineThrows) {
  BinaryRaster line(20, 40, 0);
  for (int c = 2; c < 38; ++c) line(10, c) = 1;
  Raster<double> radii(20, 40, 6e-4);
  try {
    build_graph(line, radii, {Pixel{0, 0}}, 6e-4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RootMismatch);
  }
}

TEST(ExtractGraph, StraightVesselIsOneEdge) {
  ArteryMask m = make_mask(21, 80, shapes::circle(10, 0, 6));
  shapes::fill_rect(m.grid, 8, 0, 13, 78);
  const CenterlineGraph g = extract_graph(m);
  ASSERT_EQ(g.trees.size(), 1u);
  const Tree& t = g.trees[0];
  EXPECT_EQ(t.vertices.size(), 2u);
  EXPECT_EQ(t.edges.size(), 1u);
  EXPECT_EQ(count_kind(t, VertexKind::Terminal), 1);
  EXPECT_EQ(check_graph(g), "");
  EXPECT_EQ(t.vertices[t.root].kind, VertexKind::Root);
}

TEST(ExtractGraph, YShapeHasOneBifurcation) {
  ArteryMask m = make_mask(100, 120, shapes::circle(50, 0, 6));
  shapes::thick_line(m.grid, 50, 0, 50, 50, 2.5);
  shapes::thick_line(m.grid, 50, 50, 15, 100, 2.0);
  shapes::thick_line(m.grid, 50, 50, 85, 100, 2.0);
  const CenterlineGraph g = extract_graph(m);
  ASSERT_EQ(g.trees.size(), 1u);
  const Tree& t = g.trees[0];
  EXPECT_EQ(count_kind(t, VertexKind::Bifurcation), 1);
  EXPECT_EQ(count_kind(t, VertexKind::Terminal), 2);
  EXPECT_EQ(t.edges.size(), 3u);
  EXPECT_EQ(check_graph(g), "");
}

TEST(ExtractGraph, PlusSignGivesDegreeFourJunction) {
  ArteryMask m = make_mask(81, 81, shapes::circle(40, 0, 5));
  shapes::fill_rect(m.grid, 39, 0, 42, 81);
  shapes::fill_rect(m.grid, 0, 39, 81, 42);
  const CenterlineGraph g = extract_graph(m);
  ASSERT_EQ(g.trees.size(), 1u);
  const Tree& t = g.trees[0];
  EXPECT_EQ(count_kind(t, VertexKind::Bifurcation), 1);
  EXPECT_EQ(count_kind(t, VertexKind::Terminal), 3);
  EXPECT_EQ(t.edges.size(), 4u);
  for (const auto& v : t.vertices)
    if (v.kind == VertexKind::Bifurcation) EXPECT_EQ(v.child_edges.size(), 3u);
}

TEST(ExtractGraph, LoopIsBrokenIntoForest) {
  ArteryMask m = make_mask(80, 100, shapes::circle(40, 0, 5));
  shapes::thick_line(m.grid, 40, 0, 40, 30, 2.0);
  shapes::thick_line(m.grid, 40, 30, 15, 55, 1.5);
  shapes::thick_line(m.grid, 40, 30, 65, 55, 1.5);
  shapes::thick_line(m.grid, 15, 55, 40, 80, 1.5);
  shapes::thick_line(m.grid, 65, 55, 40, 80, 1.5);
  shapes::thick_line(m.grid, 40, 80, 40, 98, 1.5);
  const CenterlineGraph g = extract_graph(m);
  EXPECT_EQ(check_graph(g), "");
  for (const Tree& t : g.trees) EXPECT_EQ(t.edges.size() + 1, t.vertices.size());
}

TEST(ExtractGraph, SyntheticTreeRoundTrip) {
  for (int depth = 0; depth <= 3; ++depth) {
    SynthSpec spec;
    spec.depth = depth;
    spec.root_radius_cm = 30e-4;
    spec.length_per_segment_cm = 0.03;
    const CenterlineGraph truth = generate_tree(spec);
    const CenterlineGraph g = extract_graph(rasterize(truth));
    ASSERT_EQ(g.trees.size(), 1u) << "depth " << depth;
    const Tree& a = truth.trees[0];
    const Tree& b = g.trees[0];
    EXPECT_EQ(b.vertices.size(), a.vertices.size()) << "depth " << depth;
    EXPECT_EQ(b.edges.size(), a.edges.size()) << "depth " << depth;
    EXPECT_EQ(count_kind(b, VertexKind::Terminal), 1 << depth);
    EXPECT_EQ(count_kind(b, VertexKind::Bifurcation), (1 << depth) - 1);
  }
}

TEST(ExtractGraph, ForestInvariantsOnRandomMasks) {
  std::mt19937 rng(21);
  int graphs = 0;
  for (int trial = 0; trial < 30; ++trial) {
    ArteryMask m = make_mask(80, 80, shapes::circle(40, 40, 4));
    m.grid = random_strokes(rng, 80, 80, 4);
    try {
      const CenterlineGraph g = extract_graph(m);
      EXPECT_EQ(check_graph(g), "") << "trial " << trial;
      ++graphs;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NoArterialTree) << e.what();
    }
  }
  EXPECT_GT(graphs, 20);
}

TEST(ExtractGraph, Deterministic) {
  std::mt19937 rng(99);
  ArteryMask m = make_mask(80, 80, shapes::circle(40, 40, 4));
  m.grid = random_strokes(rng, 80, 80, 5);
  EXPECT_EQ(to_json(extract_graph(m)).dump(), to_json(extract_graph(m)).dump());
}

TEST(GraphJson, RoundTrip) {
  SynthSpec spec;
  spec.depth = 2;
  const CenterlineGraph g = generate_tree(spec);
  const auto j = to_json(g);
  EXPECT_EQ(to_json(graph_from_json(j)).dump(), j.dump());
}
