// Command-line front end: each subcommand runs one pipeline stage on the
// files written by the previous one; `run` chains all of them.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "retihemo/analysis.hpp"
#include "retihemo/bohf.hpp"
#include "retihemo/error.hpp"
#include "retihemo/hemo.hpp"
#include "retihemo/io.hpp"
#include "retihemo/pipeline.hpp"
#include "retihemo/random.hpp"
#include "retihemo/synth.hpp"

namespace fs = std::filesystem;
using namespace retihemo;
using nlohmann::json;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v)) throw Error(ErrorCode::InvalidArgument, "cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "empty list");
  return out;
}

struct ScenarioFlags {
  std::string scenario = "sc2";
  std::optional<double> qt, p0, gamma;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario, "Boundary-condition preset: sc1, sc2 or sc3");
    app->add_option("--qt", qt, "Total outlet flow (ul/min), overrides the preset");
    app->add_option("--p0", p0, "Inlet pressure (mmHg), overrides the preset");
    app->add_option("--gamma", gamma, "Outlet flow exponent, overrides the preset");
  }

  ScenarioParams params() const {
    auto p = ScenarioParams::preset(scenario);
    if (!p) throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + scenario + "'");
    if (qt) p->qt_ul_min = *qt;
    if (p0) p->p0_mmhg = *p0;
    if (gamma) p->gamma = *gamma;
    p->validate();
    return *p;
  }
};

struct GridFlags {
  std::uint64_t seed = 0;
  std::string k_grid, lambda_grid;
  int restarts = 50;
  int jobs = 1;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--k-grid", k_grid, "Comma-separated codebook sizes per class");
    app->add_option("--lambda-grid", lambda_grid, "Comma-separated regularisation weights");
    app->add_option("--restarts", restarts, "k-means restarts");
    app->add_option("--jobs", jobs, "Worker threads");
  }

  LoocvOptions options() const {
    LoocvOptions o;
    o.seed = seed;
    if (!k_grid.empty()) o.k_grid = parse_list<int>(k_grid);
    if (!lambda_grid.empty()) o.lambda_grid = parse_list<double>(lambda_grid);
    o.kmeans_restarts = restarts;
    o.jobs = jobs;
    return o;
  }
};

std::vector<FeatureSet> load_features(const std::vector<std::string>& inputs) {
  std::vector<FeatureSet> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      auto dir = read_feature_dir(in);
      out.insert(out.end(), dir.begin(), dir.end());
    } else {
      out.push_back(feature_set_from_json(read_json(in)));
    }
  }
  return out;
}

void write_synthetic_subject(const fs::path& dir, const std::string& id, const CenterlineGraph& graph) {
  const ArteryMask mask = rasterize(graph);
  write_png_gray(dir / "masks" / (id + ".png"), mask.grid);
  write_json(dir / "od" / (id + ".json"), to_json(mask.od));
  write_json(dir / "graphs" / (id + ".json"), to_json(graph));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retinal arterial hemodynamics: graph extraction, flow simulation and classification"};
  app.require_subcommand(1);

  // extract-graph
  auto* extract = app.add_subcommand("extract-graph", "Artery mask + optic disc -> centreline graph");
  std::string mask_path, od_path, graph_out;
  double pitch_um = 6.0;
  extract->add_option("--mask", mask_path, "Binary artery mask (PNG or PGM)")->required();
  extract->add_option("--od", od_path, "Optic disc ellipse (JSON)")->required();
  extract->add_option("--pixel-pitch-um", pitch_um, "Pixel pitch in micrometres");
  extract->add_option("-o,--out", graph_out, "Output graph JSON")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Graph -> per-pixel pressure/flow table");
  std::string sim_graph, sim_out;
  ScenarioFlags sim_flags;
  sim->add_option("--graph", sim_graph, "Graph JSON")->required();
  sim_flags.add(sim);
  sim->add_option("-o,--out", sim_out, "Output solution table (TSV)")->required();

  // featurize
  auto* feat = app.add_subcommand("featurize", "Graph + solution table -> feature set");
  std::string feat_graph, feat_solution, feat_out, feat_subject, feat_labels;
  int feat_label = 0;
  feat->add_option("--graph", feat_graph, "Graph JSON")->required();
  feat->add_option("--solution", feat_solution, "Solution table")->required();
  feat->add_option("--subject", feat_subject, "Subject id (default: solution file stem)");
  feat->add_option("--label", feat_label, "Class label (-1 healthy, +1 glaucomatous)");
  feat->add_option("--labels", feat_labels, "Labels CSV to look the subject up in");
  feat->add_option("-o,--out", feat_out, "Output feature JSON")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Feature sets -> LOOCV metrics and final model");
  std::vector<std::string> eval_inputs;
  std::string eval_out;
  GridFlags eval_flags;
  eval->add_option("--features", eval_inputs, "Feature files or directories")->required();
  eval_flags.add(eval);
  eval->add_option("-o,--out-dir", eval_out, "Output directory")->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Feature sets + labels -> cohort tables and plot data");
  std::vector<std::string> an_inputs;
  std::string an_labels, an_out;
  double an_p0 = 62.22;
  analyze->add_option("--features", an_inputs, "Feature files or directories")->required();
  analyze->add_option("--labels", an_labels, "Labels CSV (subject_id,label,age,sex)")->required();
  analyze->add_option("--p0", an_p0, "Inlet pressure used for the pressure drop (mmHg)");
  analyze->add_option("-o,--out-dir", an_out, "Output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic trees or labelled cohorts");
  SynthSpec spec;
  double root_radius_um = spec.root_radius_cm * 1e4, length_um = spec.length_per_segment_cm * 1e4;
  int cohort = 0;
  std::string flows = "30,80", synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--depth", spec.depth, "Bifurcation levels");
  synth->add_option("--root-radius-um", root_radius_um, "Root radius in micrometres");
  synth->add_option("--murray-gamma", spec.murray_gamma, "Radius exponent at bifurcations");
  synth->add_option("--length-um", length_um, "Segment length in micrometres");
  synth->add_option("--asymmetry", spec.asymmetry, "Child radius ratio in (0, 1]");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--cohort", cohort, "Subjects per class; writes a labelled cohort instead of one tree");
  synth->add_option("--flows", flows, "Total outlet flow per class (ul/min), healthy first");
  synth->add_option("-o,--out-dir", synth_out, "Output directory")->required();

  // render
  auto* render = app.add_subcommand("render", "Colour the centreline by a hemodynamic field");
  std::string r_mask, r_od, r_graph, r_solution, r_field = "P", r_out;
  render->add_option("--mask", r_mask, "Artery mask")->required();
  render->add_option("--od", r_od, "Optic disc ellipse (JSON)");
  render->add_option("--graph", r_graph, "Graph JSON")->required();
  render->add_option("--solution", r_solution, "Solution table")->required();
  render->add_option("--field", r_field, "P, Q, v, Re, WSS or R");
  render->add_option("-o,--out", r_out, "Output PNG")->required();

  // run
  auto* run = app.add_subcommand("run", "Whole pipeline over a directory of masks");
  std::string config_path, run_masks, run_od, run_labels, run_out, run_field;
  std::optional<std::string> run_scenario, run_k, run_lambda;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_jobs, run_restarts;
  run->add_option("-c,--config", config_path, "JSON config; flags override its values");
  run->add_option("--masks", run_masks, "Mask directory");
  run->add_option("--od", run_od, "Optic disc directory (<subject>.json)");
  run->add_option("--labels", run_labels, "Labels CSV");
  run->add_option("-o,--out-dir", run_out, "Output directory");
  run->add_option("--scenario", run_scenario, "sc1, sc2 or sc3");
  run->add_option("--seed", run_seed, "Random seed");
  run->add_option("--k-grid", run_k, "Comma-separated codebook sizes per class");
  run->add_option("--lambda-grid", run_lambda, "Comma-separated regularisation weights");
  run->add_option("--restarts", run_restarts, "k-means restarts");
  run->add_option("--jobs", run_jobs, "Worker threads");
  run->add_option("--field", run_field, "Overlay field (empty string disables overlays)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      write_json(graph_out, to_json(extract_subject(mask_path, od_path, pitch_um)));
    } else if (*sim) {
      const CenterlineGraph graph = graph_from_json(read_json(sim_graph));
      const HemodynamicSolution solution = simulate(graph, sim_flags.params());
      write_text(sim_out, solution_table(solution));
    } else if (*feat) {
      const CenterlineGraph graph = graph_from_json(read_json(feat_graph));
      FeatureSet set = summarize(parse_solution_table(read_text(feat_solution)), graph);
      set.subject_id = feat_subject.empty() ? fs::path(feat_solution).stem().string() : feat_subject;
      set.label = feat_label;
      if (!feat_labels.empty()) {
        bool found = false;
        for (const auto& p : parse_labels(read_text(feat_labels)))
          if (p.subject_id == set.subject_id) {
            set.label = p.label;
            found = true;
          }
        if (!found) throw Error(ErrorCode::InvalidArgument, "subject " + set.subject_id + " not in labels file");
      }
      write_json(feat_out, to_json(set));
    } else if (*eval) {
      const auto features = load_features(eval_inputs);
      const LoocvOptions options = eval_flags.options();
      const LoocvResult result = loocv_evaluate(features, options);
      write_json(fs::path(eval_out) / "metrics.json", to_json(result, options));
      const FoldResult final_fit = fit_fold(features, options, derive_seed(options.seed, 0xF1A1ULL));
      json model = to_json(final_fit.model);
      model["k"] = final_fit.k;
      model["lambda"] = round_sig(final_fit.lambda);
      write_json(fs::path(eval_out) / "model.json", model);
      std::printf("AUC %.6f  accuracy %.6f  (%zu subjects)\n", result.auc, result.accuracy, features.size());
    } else if (*analyze) {
      const auto features = load_features(an_inputs);
      std::map<std::string, PatientInfo> patients;
      for (auto& p : parse_labels(read_text(an_labels))) patients[p.subject_id] = p;
      std::vector<MeasurementRecord> records;
      std::vector<PatientInfo> analysed;
      for (const auto& f : features) {
        auto it = patients.find(f.subject_id);
        if (it == patients.end()) throw Error(ErrorCode::InvalidArgument, "subject " + f.subject_id + " has no label");
        auto rec = measurement_records(f, it->second, an_p0);
        records.insert(records.end(), rec.begin(), rec.end());
        analysed.push_back(it->second);
      }
      const fs::path dir = an_out;
      write_text(dir / "records.tsv", records_tsv(records));
      const CohortSummary summary = cohort_summary(records, analysed);
      const RadiusFlowResult rf = radius_flow_correlation(records);
      write_json(dir / "summary.json", {{"cohort", to_json(summary)}, {"radius_flow", to_json(rf)}});
      write_text(dir / "radius_flow.tsv", radius_flow_plot_data(records, rf));
    } else if (*synth) {
      const fs::path dir = synth_out;
      if (cohort > 0) {
        const auto scales = parse_list<double>(flows);
        if (scales.size() != 2) throw Error(ErrorCode::InvalidArgument, "--flows needs two values");
        const auto subjects = generate_cohort_subjects(cohort, {scales[0], scales[1]}, synth_seed);
        std::vector<PatientInfo> patients;
        for (const auto& s : subjects) {
          write_synthetic_subject(dir, s.patient.subject_id, s.graph);
          write_json(dir / "features" / (s.patient.subject_id + ".json"), to_json(solve_subject(s)));
          patients.push_back(s.patient);
        }
        write_text(dir / "labels.csv", labels_csv(patients));
      } else {
        spec.seed = synth_seed;
        spec.root_radius_cm = root_radius_um * 1e-4;
        spec.length_per_segment_cm = length_um * 1e-4;
        write_synthetic_subject(dir, "tree", generate_tree(spec));
      }
    } else if (*render) {
      ArteryMask mask;
      mask.grid = read_binary_image(r_mask);
      if (!r_od.empty()) mask.od = read_od_ellipse(r_od);
      const CenterlineGraph graph = graph_from_json(read_json(r_graph));
      const HemodynamicSolution solution = parse_solution_table(read_text(r_solution));
      write_png_rgb(r_out, render_overlay(mask, graph, solution, overlay_field_from_string(r_field)));
    } else if (*run) {
      PipelineConfig config;
      if (!config_path.empty())
        config = pipeline_config_from_json(read_json(config_path), fs::path(config_path).parent_path());
      if (!run_masks.empty()) config.masks_dir = run_masks;
      if (!run_od.empty()) config.od_dir = run_od;
      if (!run_labels.empty()) config.labels_file = run_labels;
      if (!run_out.empty()) config.output_dir = run_out;
      if (run_scenario) config.scenario = *run_scenario;
      if (run_seed) config.seed = *run_seed;
      if (run_k) config.k_grid = parse_list<int>(*run_k);
      if (run_lambda) config.lambda_grid = parse_list<double>(*run_lambda);
      if (run_restarts) config.kmeans_restarts = *run_restarts;
      if (run_jobs) config.jobs = *run_jobs;
      if (run->count("--field")) config.overlay_field = run_field;
      apply_data_dir_defaults(config);
      const PipelineReport report = run_pipeline(config);
      for (const auto& f : report.failures)
        std::fprintf(stderr, "FAILED %s [%s]: %s\n", f.subject_id.empty() ? "(cohort)" : f.subject_id.c_str(),
                     f.stage.c_str(), f.message.c_str());
      if (report.auc) std::printf("AUC %.6f over %zu subjects\n", *report.auc, report.subjects.size());
      return report.ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
