#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "retihemo/vasc_graph.hpp"

namespace retihemo {

// Unit conversions at the I/O boundary; everything else is cgs.
inline constexpr double kDynPerCm2PerMmHg = 1333.22;
inline constexpr double kCm3PerSPerUlMin = 1e-3 / 60.0;

struct ScenarioParams {
  std::string scenario_id = "sc2";
  double p0_mmhg = 62.22;
  double qt_ul_min = 45.6;
  double gamma = 2.66;
  double rho_g_cm3 = 1.040;
  double plasma_viscosity_poise = 0.012;

  /// Throws InvalidArgument unless all parameters are positive.
  void validate() const;

  /// "sc1", "sc2" or "sc3" (case-insensitive).
  static std::optional<ScenarioParams> preset(std::string_view id);
};

/// In-vitro relative apparent viscosity at discharge hematocrit 0.45,
/// diameter in micrometres.
double relative_viscosity(double diameter_um);

/// Apparent blood viscosity in poise for a vessel of radius `radius_cm`.
double viscosity(double radius_cm, double plasma_viscosity_poise = 0.012);

/// Poiseuille element between two neighbouring computational nodes.
struct ElementResistance {
  double length_cm = 0.0;
  double mean_radius_cm = 0.0;
  double mu_poise = 0.0;

  static ElementResistance between(double r_a_cm, double r_b_cm, double length_cm,
                                   double plasma_viscosity_poise);

  /// dyn s / cm^5
  double cgs() const;
  /// mmHg min / ul
  double mmhg_min_per_ul() const;
};

/// Outlet flows Q_m = beta * r_m^gamma, beta chosen so that sum(Q) == qt.
std::vector<double> murray_outlet_flows(std::span<const double> outlet_radii, double qt, double gamma);

enum class PixelKind { Segment, Root, Terminal, Bifurcation, Connector };

std::string_view to_string(PixelKind kind);
std::optional<PixelKind> pixel_kind_from_string(std::string_view s);

/// Hemodynamic state at one centreline pixel.
struct PixelState {
  int tree = 0;
  int edge = -1;    // owning edge, -1 for vertex-owned pixels
  int vertex = -1;  // vertex anchored at or owning this pixel
  PixelKind kind = PixelKind::Segment;
  Pixel pixel;
  double r_cm = 0.0;
  double p_mmhg = 0.0;
  double q_ul_min = 0.0;
  double v_cm_s = 0.0;
  double r_mmhg_min_ul = 0.0;  // resistance of the element ending here
  double reynolds = 0.0;
  double wss_dyn_cm2 = 0.0;
};

struct HemodynamicSolution {
  ScenarioParams params;
  std::vector<PixelState> pixels;
  int num_inlets = 0;
  int num_outlets = 0;
  double total_outlet_flow_ul_min = 0.0;
  double residual = 0.0;  // relative residual of the assembled system
};

/// Builds the flow/pressure system on every tree (one P and one Q unknown
/// per edge pixel) and solves it. Vertex-owned pixels inherit the values of
/// the last node of their parent edge; roots get P0.
HemodynamicSolution assemble_and_solve(const CenterlineGraph& graph, const ScenarioParams& params);

/// Fills velocity, Reynolds number and wall shear stress from P/Q and radii.
void derived_fields(HemodynamicSolution& solution, const ScenarioParams& params);

/// assemble_and_solve followed by derived_fields.
HemodynamicSolution simulate(const CenterlineGraph& graph, const ScenarioParams& params);

/// Per-pixel table (tab separated, header line, '#' metadata line).
std::string solution_table(const HemodynamicSolution& solution);
HemodynamicSolution parse_solution_table(const std::string& text);

}  // namespace retihemo
