// Acceptance suite: one line per criterion, nonzero exit if any binding
// criterion fails. Criterion 8 needs the LES-AV masks (RETIHEMO_LESAV, or
// else RETIHEMO_DATA, naming a directory with masks/, od/ and labels.csv) and
// is reported but never fails the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "retihemo/analysis.hpp"
#include "retihemo/bohf.hpp"
#include "retihemo/hemo.hpp"
#include "retihemo/io.hpp"
#include "retihemo/pipeline.hpp"
#include "retihemo/random.hpp"
#include "retihemo/synth.hpp"
#include "support/oracles.hpp"

using namespace retihemo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and thresholds.
constexpr double kPoiseuilleTol = 1e-9;
constexpr double kPoiseuilleMaxMs = 10.0;
constexpr int kConservationTrees = 100;
constexpr int kMaxDepth = 8;
constexpr double kJunctionTol = 1e-10;
constexpr double kOutletSumTol = 1e-12;
constexpr double kMonotoneSlack = 1e-12;  // times the inlet pressure, for junction continuity
constexpr double kOracleTol = 1e-9;
constexpr double kMurrayTol = 1e-9;
constexpr double kLinearityTol = 1e-9;
constexpr double kGradientTol = 1e-6;
constexpr double kRestartTol = 1e-6;
constexpr double kPlantedAucMin = 0.9;
constexpr double kPermutedAucLo = 0.35;
constexpr double kPermutedAucHi = 0.65;
constexpr int kPermutations = 20;
constexpr double kPlantedMaxSeconds = 60.0;
constexpr int kLesavSubjects = 22;
constexpr double kLesavRecords = 1466, kLesavRecordsRelTol = 0.10;
constexpr double kLesavDp = 6.94, kLesavDpTol = 2.0;
constexpr double kLesavV = 2.26, kLesavVTol = 0.7;
constexpr double kLesavRho = 0.71, kLesavRhoTol = 0.10;
constexpr double kLesavAuc = 0.70, kLesavAucTol = 0.10;

struct Outcome {
  enum Status { Pass, Fail, NotRun } status = Fail;
  std::string detail;
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

CenterlineGraph straight_tube(int n, double r_cm) {
  SynthSpec spec;
  spec.depth = 0;
  spec.root_radius_cm = r_cm;
  spec.length_per_segment_cm = n * spec.pixel_pitch_cm;
  return generate_tree(spec);
}

std::map<std::pair<int, int>, std::vector<const PixelState*>> by_edge(const HemodynamicSolution& s) {
  std::map<std::pair<int, int>, std::vector<const PixelState*>> out;
  for (const auto& p : s.pixels)
    if (p.edge >= 0) out[{p.tree, p.edge}].push_back(&p);
  return out;
}

const ScenarioParams kSc2 = *ScenarioParams::preset("sc2");

Outcome poiseuille() {
  const double r = 30e-4;
  const CenterlineGraph g = straight_tube(200, r);
  if (g.trees[0].edges[0].pixels.size() != 200) return {Outcome::Fail, "tube is not 200 px"};
  simulate(g, kSc2);  // warm-up
  std::vector<double> ms;
  HemodynamicSolution s;
  for (int i = 0; i < 5; ++i) {
    const auto t0 = Clock::now();
    s = simulate(g, kSc2);
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const double expected = 199 * oracle::poiseuille_mmhg_min_ul(oracle::blood_viscosity(r), 6e-4, r) * 45.6;
  const auto edges = by_edge(s);
  const auto& nodes = edges.at({0, 0});
  const double err = rel(nodes.front()->p_mmhg - nodes.back()->p_mmhg, expected);
  const bool ok = err <= kPoiseuilleTol && ms[2] < kPoiseuilleMaxMs;
  return {ok ? Outcome::Pass : Outcome::Fail,
          fmt("dP rel err %.3g", err) + fmt(", median solve %.3f ms", ms[2])};
}

std::vector<CenterlineGraph> seeded_trees() {
  std::vector<CenterlineGraph> out;
  for (int seed = 0; seed < kConservationTrees; ++seed) out.push_back(generate_tree(random_spec(seed, kMaxDepth)));
  return out;
}

Outcome conservation(const std::vector<CenterlineGraph>& trees) {
  double worst_junction = 0, worst_outlet = 0;
  int monotone_violations = 0, max_depth_seen = 0;
  for (const auto& g : trees) {
    const auto s = simulate(g, kSc2);
    const auto edges = by_edge(s);
    const Tree& t = g.trees[0];
    double outlets = 0;
    // Walk every root-to-terminal path.
    std::function<void(int, double, int)> walk = [&](int e, double p_upstream, int level) {
      const auto& nodes = edges.at({0, e});
      double p = p_upstream;
      for (const auto* n : nodes) {
        if (n->p_mmhg > p + kMonotoneSlack * kSc2.p0_mmhg) ++monotone_violations;
        p = n->p_mmhg;
      }
      const Vertex& child = t.vertices[t.edges[e].child];
      if (child.kind == VertexKind::Terminal) {
        max_depth_seen = std::max(max_depth_seen, level);
        outlets += nodes.back()->q_ul_min;
        return;
      }
      double q_children = 0;
      for (int ce : child.child_edges) q_children += edges.at({0, ce}).front()->q_ul_min;
      worst_junction = std::max(worst_junction, rel(q_children, nodes.back()->q_ul_min));
      for (int ce : child.child_edges) walk(ce, p, level + 1);
    };
    for (int ce : t.vertices[t.root].child_edges) walk(ce, kSc2.p0_mmhg, 0);
    worst_outlet = std::max(worst_outlet, rel(outlets, kSc2.qt_ul_min));
  }
  const bool ok = worst_junction <= kJunctionTol && worst_outlet <= kOutletSumTol && monotone_violations == 0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(trees.size()) + " trees up to depth " + std::to_string(max_depth_seen) +
              fmt(", junction %.3g", worst_junction) + fmt(", outlet sum %.3g", worst_outlet) +
              ", monotonicity violations " + std::to_string(monotone_violations)};
}

Outcome oracle_equivalence(const std::vector<CenterlineGraph>& trees) {
  double worst = 0;
  for (const auto& g : trees) {
    const auto s = simulate(g, kSc2);
    const auto ref = oracle::tree_traversal(g, kSc2.p0_mmhg, kSc2.qt_ul_min, kSc2.gamma);
    for (const auto& [key, nodes] : by_edge(s))
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& o = ref[key.first][key.second][i];
        // Pressures cross zero in deep trees, so compare the drop from the inlet.
        const double drop = kSc2.p0_mmhg - nodes[i]->p_mmhg, ref_drop = kSc2.p0_mmhg - o.p;
        if (drop != ref_drop) worst = std::max(worst, rel(drop, ref_drop));
        worst = std::max(worst, rel(nodes[i]->q_ul_min, o.q));
      }
  }
  return {worst <= kOracleTol ? Outcome::Pass : Outcome::Fail, fmt("max rel diff %.3g", worst)};
}

Outcome murray_split() {
  SynthSpec spec;
  spec.depth = 1;
  spec.asymmetry = 0.5;  // radii r and 2r
  const CenterlineGraph g = generate_tree(spec);
  const auto s = simulate(g, kSc2);
  std::vector<std::pair<double, double>> outlets;  // (radius, flow)
  for (const auto& p : s.pixels)
    if (p.kind == PixelKind::Terminal) outlets.emplace_back(p.r_cm, p.q_ul_min);
  if (outlets.size() != 2) return {Outcome::Fail, "expected two outlets"};
  std::sort(outlets.begin(), outlets.end());
  const double radius_ratio = outlets[1].first / outlets[0].first;
  const double err = rel(outlets[1].second / outlets[0].second, std::pow(2.0, 2.66));
  const bool ok = std::abs(radius_ratio - 2.0) < 1e-12 && err <= kMurrayTol;
  return {ok ? Outcome::Pass : Outcome::Fail, fmt("flow ratio rel err %.3g", err)};
}

Outcome linearity(const std::vector<CenterlineGraph>& trees) {
  ScenarioParams doubled = kSc2;
  doubled.qt_ul_min *= 2;
  double worst = 0;
  for (std::size_t i = 0; i < trees.size(); i += 10) {
    const auto a = simulate(trees[i], kSc2), b = simulate(trees[i], doubled);
    for (std::size_t k = 0; k < a.pixels.size(); ++k) {
      worst = std::max(worst, rel(b.pixels[k].q_ul_min, 2 * a.pixels[k].q_ul_min));
      const double da = kSc2.p0_mmhg - a.pixels[k].p_mmhg, db = doubled.p0_mmhg - b.pixels[k].p_mmhg;
      if (da != 0) worst = std::max(worst, rel(db, 2 * da));
    }
  }
  return {worst <= kLinearityTol ? Outcome::Pass : Outcome::Fail, fmt("max rel deviation %.3g", worst)};
}

Outcome logistic_gradient() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> N;
  const int n = 24, d = 10;
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 2 ? 1 : -1;
    for (int j = 0; j < d; ++j) X(i, j) = N(rng) + 0.3 * y[i] * (j % 3 == 0);
  }
  double worst_fd = 0;
  for (int point = 0; point < 10; ++point) {
    Eigen::VectorXd beta(d);
    for (int j = 0; j < d; ++j) beta[j] = N(rng);
    const double b = N(rng), lambda = std::pow(10.0, point - 5);
    const Eigen::VectorXd g = logreg_gradient(X, y, lambda, beta, b);
    // Fourth-order central differences, compared norm-wise.
    Eigen::VectorXd fd(d + 1);
    for (int j = 0; j <= d; ++j) {
      auto f = [&](double step) {
        Eigen::VectorXd bb = beta;
        double ii = b;
        (j < d ? bb[j] : ii) += step;
        return logreg_objective(X, y, lambda, bb, ii);
      };
      const double h = 1e-3 * std::max(1.0, std::abs(j < d ? beta[j] : b));
      fd[j] = (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h);
    }
    worst_fd = std::max(worst_fd, (fd - g).norm() / g.norm());
  }
  const LogRegModel ref = train_logreg(X, y, 0.5);
  double worst_restart = 0;
  for (int r = 0; r < 5; ++r) {
    Eigen::VectorXd init(d);
    for (int j = 0; j < d; ++j) init[j] = 2 * N(rng);
    const LogRegModel m = train_logreg(X, y, 0.5, {}, &init, N(rng));
    worst_restart = std::max(worst_restart, (m.beta - ref.beta).lpNorm<Eigen::Infinity>());
  }
  const bool ok = worst_fd <= kGradientTol && worst_restart <= kRestartTol;
  return {ok ? Outcome::Pass : Outcome::Fail,
          fmt("gradient rel err %.3g", worst_fd) + fmt(", restart beta spread %.3g", worst_restart)};
}

Outcome planted_cohort() {
  const auto cohort = generate_cohort(10, {30, 80}, 7);
  LoocvOptions options;  // full default grids and restarts
  options.seed = 7;
  const auto t0 = Clock::now();
  const double planted = loocv_evaluate(cohort, options).auc;
  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  std::mt19937_64 rng(99);
  double permuted = 0;
  for (int p = 0; p < kPermutations; ++p) {
    std::vector<int> labels;
    for (const auto& s : cohort) labels.push_back(s.label);
    shuffle(labels, rng);
    auto shuffled = cohort;
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].label = labels[i];
    LoocvOptions o = options;
    o.seed = derive_seed(options.seed, p);
    permuted += loocv_evaluate(shuffled, o).auc;
  }
  permuted /= kPermutations;
  const bool ok = planted >= kPlantedAucMin && permuted >= kPermutedAucLo && permuted <= kPermutedAucHi &&
                  seconds < kPlantedMaxSeconds;
  return {ok ? Outcome::Pass : Outcome::Fail, fmt("AUC %.4f", planted) + fmt(" in %.1f s", seconds) +
                                                  fmt(", mean permuted AUC %.4f", permuted)};
}

void write_cohort(const fs::path& dir, int per_class, std::uint64_t seed) {
  std::vector<PatientInfo> patients;
  for (const auto& s : generate_cohort_subjects(per_class, {30, 80}, seed)) {
    const ArteryMask m = rasterize(s.graph);
    write_png_gray(dir / "masks" / (s.patient.subject_id + ".png"), m.grid);
    write_json(dir / "od" / (s.patient.subject_id + ".json"), to_json(m.od));
    patients.push_back(s.patient);
  }
  write_text(dir / "labels.csv", labels_csv(patients));
}

Outcome lesav() {
  const char* env = std::getenv("RETIHEMO_LESAV");
  if (!env || !*env) env = std::getenv(kDataDirEnv);
  if (!env || !*env || !fs::is_directory(fs::path(env) / "masks"))
    return {Outcome::NotRun, "dataset absent (set RETIHEMO_LESAV)"};
  const fs::path root = env;
  PipelineConfig c;
  c.masks_dir = root / "masks";
  c.od_dir = root / "od";
  c.labels_file = root / "labels.csv";
  c.output_dir = fs::temp_directory_path() / "retihemo_acceptance_lesav";
  c.overlay_field.clear();
  const PipelineReport report = run_pipeline(c);

  std::vector<MeasurementRecord> records;
  std::map<std::string, PatientInfo> patients;
  for (auto& p : parse_labels(read_text(c.labels_file))) patients[p.subject_id] = p;
  for (const auto& f : read_feature_dir(c.output_dir / "features")) {
    auto rec = measurement_records(f, patients[f.subject_id], kSc2.p0_mmhg);
    records.insert(records.end(), rec.begin(), rec.end());
  }
  std::vector<double> dp, v;
  for (const auto& r : records) dp.push_back(r.dp_mmhg), v.push_back(r.v_cm_s);
  const double mean_dp = records.empty() ? 0 : mean_std(dp).mean;
  const double mean_v = records.empty() ? 0 : mean_std(v).mean;
  double rho = 0;
  const fs::path summary = c.output_dir / "analysis" / "summary.json";
  if (fs::exists(summary)) rho = read_json(summary)["radius_flow"]["spearman_rho"].get<double>();
  const double a = report.auc.value_or(0.0);

  const bool ok = static_cast<int>(report.subjects.size()) == kLesavSubjects && report.ok() &&
                  std::abs(records.size() - kLesavRecords) <= kLesavRecordsRelTol * kLesavRecords &&
                  std::abs(mean_dp - kLesavDp) <= kLesavDpTol && std::abs(mean_v - kLesavV) <= kLesavVTol &&
                  std::abs(rho - kLesavRho) <= kLesavRhoTol && std::abs(a - kLesavAuc) <= kLesavAucTol;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(report.subjects.size()) + " subjects, " + std::to_string(records.size()) + " records" +
              fmt(", mean dP %.3f mmHg", mean_dp) + fmt(", mean v %.3f cm/s", mean_v) + fmt(", rho %.3f", rho) +
              fmt(", AUC %.4f", a)};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "retihemo_acceptance_determinism";
  fs::remove_all(dir);
  write_cohort(dir, 6, 31);
  auto config = [&](const char* out) {
    PipelineConfig c;
    c.masks_dir = dir / "masks";
    c.od_dir = dir / "od";
    c.labels_file = dir / "labels.csv";
    c.output_dir = dir / out;
    c.seed = 17;
    return c;
  };
  const auto a = run_pipeline(config("run1"));
  const auto b = run_pipeline(config("run2"));
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string ma = slurp(dir / "run1" / "metrics.json"), mb = slurp(dir / "run2" / "metrics.json");
  const bool ok = a.ok() && b.ok() && !ma.empty() && ma == mb;
  fs::remove_all(dir);
  return {ok ? Outcome::Pass : Outcome::Fail, std::to_string(ma.size()) + " byte metrics reports " +
                                                  (ma == mb ? "identical" : "differ")};
}

}  // namespace

int main() {
  const auto trees = seeded_trees();
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"analytic Poiseuille tube", poiseuille},
      {"conservation on seeded trees", [&] { return conservation(trees); }},
      {"tree traversal oracle", [&] { return oracle_equivalence(trees); }},
      {"power-law outlet split", murray_split},
      {"linearity in total flow", [&] { return linearity(trees); }},
      {"logistic gradient and restarts", logistic_gradient},
      {"planted cohort classification", planted_cohort},
      {"LES-AV reproduction (soft)", lesav},
      {"determinism of metrics report", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const bool soft = i == 7;
    const char* status = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::NotRun ? "NOT RUN" : "FAIL";
    std::printf("criterion %zu %-8s %s: %s\n", i + 1, status, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    if (o.status == Outcome::Fail && !soft) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
