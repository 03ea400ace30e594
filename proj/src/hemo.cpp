#include "retihemo/hemo.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "retihemo/error.hpp"
#include "retihemo/io.hpp"

namespace retihemo {

void ScenarioParams::validate() const {
  if (!(p0_mmhg > 0) || !(qt_ul_min > 0) || !(gamma > 0) || !(rho_g_cm3 > 0) || !(plasma_viscosity_poise > 0))
    throw Error(ErrorCode::InvalidArgument, "scenario parameters must be positive");
}

std::optional<ScenarioParams> ScenarioParams::preset(std::string_view id) {
  std::string lower(id);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  ScenarioParams p;
  p.scenario_id = lower;
  if (lower == "sc1") {
    p.qt_ul_min = 30.0;
  } else if (lower == "sc2") {
    p.qt_ul_min = 45.6;
  } else if (lower == "sc3") {
    p.qt_ul_min = 80.0;
  } else {
    return std::nullopt;
  }
  return p;
}

double relative_viscosity(double diameter_um) {
  return 220.0 * std::exp(-1.3 * diameter_um) + 3.2 - 2.44 * std::exp(-0.06 * std::pow(diameter_um, 0.645));
}

double viscosity(double radius_cm, double plasma_viscosity_poise) {
  if (!(radius_cm > 0.0)) throw Error(ErrorCode::InvalidRadius, "radius must be positive");
  const double diameter_um = 2.0 * radius_cm * 1e4;
  return relative_viscosity(diameter_um) * plasma_viscosity_poise;
}

ElementResistance ElementResistance::between(double r_a_cm, double r_b_cm, double length_cm,
                                             double plasma_viscosity_poise) {
  ElementResistance e;
  e.length_cm = length_cm;
  e.mean_radius_cm = 0.5 * (r_a_cm + r_b_cm);
  e.mu_poise = viscosity(e.mean_radius_cm, plasma_viscosity_poise);
  return e;
}

double ElementResistance::cgs() const {
  const double r2 = mean_radius_cm * mean_radius_cm;
  return 8.0 * mu_poise * length_cm / (std::numbers::pi * r2 * r2);
}

double ElementResistance::mmhg_min_per_ul() const {
  return cgs() * kCm3PerSPerUlMin / kDynPerCm2PerMmHg;
}

std::vector<double> murray_outlet_flows(std::span<const double> outlet_radii, double qt, double gamma) {
  if (outlet_radii.empty()) throw Error(ErrorCode::NoOutlets, "no outlets");
  if (!(qt > 0.0) || !(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "QT and gamma must be positive");
  std::vector<double> flows(outlet_radii.size());
  double sum = 0.0;
  for (std::size_t m = 0; m < outlet_radii.size(); ++m) {
    if (!(outlet_radii[m] > 0.0)) throw Error(ErrorCode::InvalidRadius, "outlet radius must be positive");
    flows[m] = std::pow(outlet_radii[m], gamma);
    sum += flows[m];
  }
  const double beta = qt / sum;
  for (double& q : flows) q *= beta;
  return flows;
}

std::string_view to_string(PixelKind kind) {
  switch (kind) {
    case PixelKind::Segment: return "segment";
    case PixelKind::Root: return "root";
    case PixelKind::Terminal: return "terminal";
    case PixelKind::Bifurcation: return "bifurcation";
    case PixelKind::Connector: return "connector";
  }
  return "segment";
}

std::optional<PixelKind> pixel_kind_from_string(std::string_view s) {
  for (auto k : {PixelKind::Segment, PixelKind::Root, PixelKind::Terminal, PixelKind::Bifurcation,
                 PixelKind::Connector})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

namespace {

double pixel_distance_cm(Pixel a, Pixel b, double pitch_cm) {
  return std::hypot(a.row - b.row, a.col - b.col) * pitch_cm;
}

PixelKind vertex_pixel_kind(const Vertex& v) {
  switch (v.kind) {
    case VertexKind::Root: return v.branching ? PixelKind::Bifurcation : PixelKind::Root;
    case VertexKind::Bifurcation: return PixelKind::Bifurcation;
    case VertexKind::Terminal: return PixelKind::Terminal;
    case VertexKind::Connector: return PixelKind::Connector;
  }
  return PixelKind::Segment;
}

}  // namespace

HemodynamicSolution assemble_and_solve(const CenterlineGraph& graph, const ScenarioParams& params) {
  params.validate();
  const double pitch = graph.pixel_pitch_cm;

  // Node numbering: edge pixels only. offset[t][e] = first node of edge e.
  std::vector<std::vector<int>> offset(graph.trees.size());
  int n = 0;
  std::vector<double> outlet_radii;
  for (std::size_t t = 0; t < graph.trees.size(); ++t) {
    const Tree& tree = graph.trees[t];
    for (const Edge& e : tree.edges) {
      if (e.pixels.empty()) throw Error(ErrorCode::SolveFailure, "empty edge");
      offset[t].push_back(n);
      n += static_cast<int>(e.pixels.size());
    }
    for (const Vertex& v : tree.vertices)
      if (v.kind == VertexKind::Terminal) outlet_radii.push_back(tree.edges.at(v.parent_edge).radii_cm.back());
  }
  const std::vector<double> outlet_flows = murray_outlet_flows(outlet_radii, params.qt_ul_min, params.gamma);

  // Unknown 2i = P_i (mmHg), 2i+1 = Q_i (ul/min).
  const auto P = [](int i) { return 2 * i; };
  const auto Q = [](int i) { return 2 * i + 1; };
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
  std::vector<double> element_r(n, 0.0);
  int row = 0;
  std::size_t outlet = 0;
  for (std::size_t t = 0; t < graph.trees.size(); ++t) {
    const Tree& tree = graph.trees[t];
    for (std::size_t ei = 0; ei < tree.edges.size(); ++ei) {
      const Edge& e = tree.edges[ei];
      const int first = offset[t][ei];
      const int m = static_cast<int>(e.pixels.size());
      for (int i = 1; i < m; ++i) {
        const int a = first + i - 1, b = first + i;
        const auto elem = ElementResistance::between(e.radii_cm[i - 1], e.radii_cm[i],
                                                     pixel_distance_cm(e.pixels[i - 1], e.pixels[i], pitch),
                                                     params.plasma_viscosity_poise);
        element_r[b] = elem.mmhg_min_per_ul();
        triplets.emplace_back(row, Q(b), 1.0);
        triplets.emplace_back(row, Q(a), -1.0);
        ++row;
        triplets.emplace_back(row, P(a), 1.0);
        triplets.emplace_back(row, P(b), -1.0);
        triplets.emplace_back(row, Q(b), -element_r[b]);
        ++row;
      }
      // Inlet side: prescribed pressure or junction pressure continuity.
      const Vertex& parent = tree.vertices[e.parent];
      if (e.parent == tree.root) {
        triplets.emplace_back(row, P(first), 1.0);
        rhs[row] = params.p0_mmhg;
      } else {
        const int pe = parent.parent_edge;
        const int upstream = offset[t][pe] + static_cast<int>(tree.edges[pe].pixels.size()) - 1;
        triplets.emplace_back(row, P(first), 1.0);
        triplets.emplace_back(row, P(upstream), -1.0);
      }
      ++row;
      // Outlet side: Murray flow or junction mass conservation.
      const Vertex& child = tree.vertices[e.child];
      const int last = first + m - 1;
      if (child.kind == VertexKind::Terminal) {
        triplets.emplace_back(row, Q(last), 1.0);
        rhs[row] = outlet_flows[outlet++];
      } else {
        triplets.emplace_back(row, Q(last), 1.0);
        for (int ce : child.child_edges) triplets.emplace_back(row, Q(offset[t][ce]), -1.0);
      }
      ++row;
    }
  }
  if (row != 2 * n) throw Error(ErrorCode::SolveFailure, "system is not square");

  Eigen::SparseMatrix<double> A(2 * n, 2 * n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::SolveFailure, "singular flow system");
  Eigen::VectorXd x = lu.solve(rhs);
  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  double residual = (A * x - rhs).norm() / rhs_norm;
  for (int it = 0; it < 3 && residual > 1e-14; ++it) {
    const Eigen::VectorXd correction = lu.solve(rhs - A * x);
    const Eigen::VectorXd candidate = x + correction;
    const double r = (A * candidate - rhs).norm() / rhs_norm;
    if (!(r < residual)) break;
    x = candidate;
    residual = r;
  }
  if (!std::isfinite(residual) || residual > 1e-10)
    throw Error(ErrorCode::SolveFailure, "flow system residual too large");

  HemodynamicSolution sol;
  sol.params = params;
  sol.residual = residual;
  sol.num_inlets = static_cast<int>(graph.trees.size());
  sol.num_outlets = static_cast<int>(outlet_radii.size());
  for (double q : outlet_flows) sol.total_outlet_flow_ul_min += q;

  for (std::size_t t = 0; t < graph.trees.size(); ++t) {
    const Tree& tree = graph.trees[t];
    for (std::size_t ei = 0; ei < tree.edges.size(); ++ei) {
      const Edge& e = tree.edges[ei];
      for (std::size_t i = 0; i < e.pixels.size(); ++i) {
        const int node = offset[t][ei] + static_cast<int>(i);
        PixelState s;
        s.tree = static_cast<int>(t);
        s.edge = static_cast<int>(ei);
        s.pixel = e.pixels[i];
        s.r_cm = e.radii_cm[i];
        s.p_mmhg = x[P(node)];
        s.q_ul_min = x[Q(node)];
        s.r_mmhg_min_ul = element_r[node];
        if (i == 0 && e.parent == tree.root && tree.vertices[e.parent].pixels.empty()) {
          s.kind = PixelKind::Root;
          s.vertex = e.parent;
        } else if (i + 1 == e.pixels.size() && tree.vertices[e.child].kind == VertexKind::Terminal &&
                   tree.vertices[e.child].pixels.empty()) {
          s.kind = PixelKind::Terminal;
          s.vertex = e.child;
        }
        sol.pixels.push_back(s);
      }
    }
    for (std::size_t vi = 0; vi < tree.vertices.size(); ++vi) {
      const Vertex& v = tree.vertices[vi];
      if (v.pixels.empty()) continue;
      PixelState base;
      if (static_cast<int>(vi) == tree.root) {
        base.p_mmhg = params.p0_mmhg;
        for (int ce : v.child_edges) base.q_ul_min += x[Q(offset[t][ce])];
      } else {
        const int pe = v.parent_edge;
        const int last = offset[t][pe] + static_cast<int>(tree.edges[pe].pixels.size()) - 1;
        base.p_mmhg = x[P(last)];
        base.q_ul_min = x[Q(last)];
        base.r_mmhg_min_ul = element_r[last];
        base.r_cm = tree.edges[pe].radii_cm.back();
      }
      for (std::size_t k = 0; k < v.pixels.size(); ++k) {
        PixelState s = base;
        s.tree = static_cast<int>(t);
        s.vertex = static_cast<int>(vi);
        s.kind = vertex_pixel_kind(v);
        s.pixel = v.pixels[k];
        if (static_cast<int>(vi) == tree.root) s.r_cm = v.radii_cm[k];
        sol.pixels.push_back(s);
      }
    }
  }
  return sol;
}

void derived_fields(HemodynamicSolution& solution, const ScenarioParams& params) {
  for (PixelState& s : solution.pixels) {
    const double r = s.r_cm;
    const double q = s.q_ul_min * kCm3PerSPerUlMin;
    const double mu = viscosity(r, params.plasma_viscosity_poise);
    s.v_cm_s = q / (std::numbers::pi * r * r);
    s.reynolds = params.rho_g_cm3 * 2.0 * r * s.v_cm_s / mu;
    s.wss_dyn_cm2 = 4.0 * mu * q / (std::numbers::pi * r * r * r);
  }
}

HemodynamicSolution simulate(const CenterlineGraph& graph, const ScenarioParams& params) {
  HemodynamicSolution sol = assemble_and_solve(graph, params);
  derived_fields(sol, params);
  return sol;
}

namespace {

constexpr const char* kHeader =
    "tree\tedge\tvertex\tkind\trow\tcol\tr_cm\tP_mmHg\tQ_ul_min\tv_cm_s\tR_mmHg_min_ul\tRe\tWSS_dyn_cm2";

}  // namespace

std::string solution_table(const HemodynamicSolution& solution) {
  std::ostringstream out;
  const auto& p = solution.params;
  out << "# scenario=" << p.scenario_id << " p0_mmHg=" << format_number(p.p0_mmhg)
      << " qt_ul_min=" << format_number(p.qt_ul_min) << " gamma=" << format_number(p.gamma)
      << " rho_g_cm3=" << format_number(p.rho_g_cm3)
      << " plasma_viscosity_poise=" << format_number(p.plasma_viscosity_poise)
      << " inlets=" << solution.num_inlets << " outlets=" << solution.num_outlets
      << " total_outlet_flow_ul_min=" << format_number(solution.total_outlet_flow_ul_min)
      << " residual=" << format_number(solution.residual) << "\n";
  out << kHeader << "\n";
  for (const auto& s : solution.pixels) {
    out << s.tree << '\t' << s.edge << '\t' << s.vertex << '\t' << to_string(s.kind) << '\t' << s.pixel.row
        << '\t' << s.pixel.col << '\t' << format_number(s.r_cm) << '\t' << format_number(s.p_mmhg) << '\t'
        << format_number(s.q_ul_min) << '\t' << format_number(s.v_cm_s) << '\t'
        << format_number(s.r_mmhg_min_ul) << '\t' << format_number(s.reynolds) << '\t'
        << format_number(s.wss_dyn_cm2) << '\n';
  }
  return out.str();
}

HemodynamicSolution parse_solution_table(const std::string& text) {
  HemodynamicSolution sol;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string kv;
      while (meta >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (key == "scenario") sol.params.scenario_id = value;
        else if (key == "p0_mmHg") sol.params.p0_mmhg = std::stod(value);
        else if (key == "qt_ul_min") sol.params.qt_ul_min = std::stod(value);
        else if (key == "gamma") sol.params.gamma = std::stod(value);
        else if (key == "rho_g_cm3") sol.params.rho_g_cm3 = std::stod(value);
        else if (key == "plasma_viscosity_poise") sol.params.plasma_viscosity_poise = std::stod(value);
        else if (key == "inlets") sol.num_inlets = std::stoi(value);
        else if (key == "outlets") sol.num_outlets = std::stoi(value);
        else if (key == "total_outlet_flow_ul_min") sol.total_outlet_flow_ul_min = std::stod(value);
        else if (key == "residual") sol.residual = std::stod(value);
      }
      continue;
    }
    if (!header_seen) {
      if (line != kHeader) throw Error(ErrorCode::ParseError, "unexpected solution table header");
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    PixelState s;
    std::string kind;
    if (!(fields >> s.tree >> s.edge >> s.vertex >> kind >> s.pixel.row >> s.pixel.col >> s.r_cm >> s.p_mmhg >>
          s.q_ul_min >> s.v_cm_s >> s.r_mmhg_min_ul >> s.reynolds >> s.wss_dyn_cm2))
      throw Error(ErrorCode::ParseError, "malformed solution row: " + line);
    const auto k = pixel_kind_from_string(kind);
    if (!k) throw Error(ErrorCode::ParseError, "unknown pixel kind " + kind);
    s.kind = *k;
    sol.pixels.push_back(s);
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, "missing solution table header");
  return sol;
}

}  // namespace retihemo
