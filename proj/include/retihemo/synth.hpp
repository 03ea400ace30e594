#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "retihemo/analysis.hpp"
#include "retihemo/bohf.hpp"
#include "retihemo/hemo.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

/// Binary tree drawn as straight strokes: a horizontal root segment, then
/// children at +45 and -45 degrees at every bifurcation. Offsets halve per
/// level so subtrees never share rows.
struct SynthSpec {
  int depth = 2;                        // bifurcation levels; 0 is a single edge
  double root_radius_cm = 60e-4;
  double murray_gamma = 3.0;            // r_parent^g = r_1^g + r_2^g
  double length_per_segment_cm = 0.03;  // root and deepest segment length
  std::uint64_t seed = 0;
  double asymmetry = 1.0;               // r_small / r_large in (0, 1]
  bool random_asymmetry = false;        // draw each ratio from [asymmetry, 1]
  double pixel_pitch_cm = 6e-4;

  /// Throws InvalidArgument.
  void validate() const;
};

/// Throws DepthTooLarge when a radius drops below one pixel.
CenterlineGraph generate_tree(const SynthSpec& spec);

/// Disc-swept strokes along every edge plus an optic disc around the root.
ArteryMask rasterize(const CenterlineGraph& graph);

/// Seeded spec with depth in [0, max_depth] and random asymmetry; the root
/// radius is raised when needed so that every leaf stays above one pixel.
SynthSpec random_spec(std::uint64_t seed, int max_depth);

struct SyntheticSubject {
  PatientInfo patient;
  SynthSpec spec;
  CenterlineGraph graph;
  double qt_ul_min = 0.0;
};

/// n_per_class subjects per label (-1 first); label -1 gets
/// class_flow_scales[0] as total outlet flow, +1 gets class_flow_scales[1].
std::vector<SyntheticSubject> generate_cohort_subjects(int n_per_class, std::array<double, 2> class_flow_scales,
                                                       std::uint64_t seed);

std::vector<FeatureSet> generate_cohort(int n_per_class, std::array<double, 2> class_flow_scales,
                                        std::uint64_t seed);

/// Solves a cohort subject under SC2 with its own total flow.
FeatureSet solve_subject(const SyntheticSubject& subject);

}  // namespace retihemo
