#include "retihemo/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <mutex>

#include "retihemo/error.hpp"
#include "retihemo/parallel.hpp"
#include "retihemo/random.hpp"

namespace retihemo {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const FeatureSet& set) {
  json elements = json::array();
  for (const auto& e : set.elements) {
    json values = json::array();
    for (double v : e.values) values.push_back(round_sig(v));
    elements.push_back({{"kind", to_string(e.kind)}, {"values", values}, {"radius_cm", round_sig(e.radius_cm)}});
  }
  return {{"format", "retihemo-features"},
          {"version", 1},
          {"subject_id", set.subject_id},
          {"label", set.label},
          {"fields", {"Q_ul_min", "P_mmHg", "v_cm_s", "R_mmHg_min_ul", "Re", "WSS_dyn_cm2"}},
          {"elements", elements}};
}

FeatureSet feature_set_from_json(const json& j) {
  try {
    if (j.at("format") != "retihemo-features") throw Error(ErrorCode::ParseError, "not a feature file");
    FeatureSet set;
    set.subject_id = j.at("subject_id").get<std::string>();
    set.label = j.at("label").get<int>();
    for (const auto& e : j.at("elements")) {
      FeatureElement el;
      auto kind = graph_element_kind_from_string(e.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ParseError, "unknown element kind");
      el.kind = *kind;
      const auto& values = e.at("values");
      if (values.size() != kHemoDims) throw Error(ErrorCode::ParseError, "feature vector must have 6 values");
      for (int d = 0; d < kHemoDims; ++d) el.values[d] = values[d].get<double>();
      el.radius_cm = e.at("radius_cm").get<double>();
      set.elements.push_back(el);
    }
    return set;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("feature file: ") + e.what());
  }
}

void PipelineConfig::validate() const {
  if (masks_dir.empty() || !fs::is_directory(masks_dir))
    throw Error(ErrorCode::IoError, "mask directory not found: " + masks_dir.string());
  if (od_dir.empty() || !fs::is_directory(od_dir))
    throw Error(ErrorCode::IoError, "optic disc directory not found: " + od_dir.string());
  if (!labels_file.empty() && !fs::is_regular_file(labels_file))
    throw Error(ErrorCode::IoError, "labels file not found: " + labels_file.string());
  if (output_dir.empty()) throw Error(ErrorCode::InvalidArgument, "output directory is empty");
  scenario_params().validate();
  if (!overlay_field.empty()) overlay_field_from_string(overlay_field);
  if (!(pixel_pitch_um > 0)) throw Error(ErrorCode::InvalidArgument, "pixel pitch must be positive");
  if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be at least 1");
  if (k_grid.empty() || lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty search grid");
}

ScenarioParams PipelineConfig::scenario_params() const {
  auto p = ScenarioParams::preset(scenario);
  if (!p) throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + scenario + "'");
  if (qt_ul_min) p->qt_ul_min = *qt_ul_min;
  if (p0_mmhg) p->p0_mmhg = *p0_mmhg;
  if (gamma) p->gamma = *gamma;
  return *p;
}

LoocvOptions PipelineConfig::loocv_options() const {
  LoocvOptions o;
  o.k_grid = k_grid;
  o.lambda_grid = lambda_grid;
  o.seed = seed;
  o.kmeans_restarts = kmeans_restarts;
  o.jobs = jobs;
  return o;
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  auto path = [&](const char* key, fs::path& out) {
    if (!j.contains(key)) return;
    fs::path p = j.at(key).get<std::string>();
    out = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  try {
    path("masks", c.masks_dir);
    path("od", c.od_dir);
    path("labels", c.labels_file);
    path("output", c.output_dir);
    if (j.contains("scenario")) c.scenario = j.at("scenario").get<std::string>();
    if (j.contains("qt_ul_min")) c.qt_ul_min = j.at("qt_ul_min").get<double>();
    if (j.contains("p0_mmhg")) c.p0_mmhg = j.at("p0_mmhg").get<double>();
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("k_grid")) c.k_grid = j.at("k_grid").get<std::vector<int>>();
    if (j.contains("lambda_grid")) c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    if (j.contains("kmeans_restarts")) c.kmeans_restarts = j.at("kmeans_restarts").get<int>();
    if (j.contains("overlay_field")) c.overlay_field = j.at("overlay_field").get<std::string>();
    if (j.contains("pixel_pitch_um")) c.pixel_pitch_um = j.at("pixel_pitch_um").get<double>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
    if (j.contains("group_scenarios")) c.group_scenarios = j.at("group_scenarios").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return c;
}

json to_json(const PipelineConfig& c) {
  json j = {{"masks", c.masks_dir.string()},
            {"od", c.od_dir.string()},
            {"labels", c.labels_file.string()},
            {"output", c.output_dir.string()},
            {"scenario", c.scenario},
            {"seed", c.seed},
            {"k_grid", c.k_grid},
            {"lambda_grid", c.lambda_grid},
            {"kmeans_restarts", c.kmeans_restarts},
            {"overlay_field", c.overlay_field},
            {"pixel_pitch_um", c.pixel_pitch_um},
            {"jobs", c.jobs},
            {"group_scenarios", c.group_scenarios}};
  if (c.qt_ul_min) j["qt_ul_min"] = *c.qt_ul_min;
  if (c.p0_mmhg) j["p0_mmhg"] = *c.p0_mmhg;
  if (c.gamma) j["gamma"] = *c.gamma;
  return j;
}

void apply_data_dir_defaults(PipelineConfig& config) {
  const char* env = std::getenv(kDataDirEnv);
  if (!env || !*env) return;
  const fs::path root = env;
  if (config.masks_dir.empty()) config.masks_dir = root / "masks";
  if (config.od_dir.empty()) config.od_dir = root / "od";
  if (config.labels_file.empty() && fs::exists(root / "labels.csv")) config.labels_file = root / "labels.csv";
}

std::vector<fs::path> find_masks(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".pgm" || ext == ".PNG" || ext == ".PGM") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
  return out;
}

namespace {

ArteryMask load_mask(const fs::path& mask_path, const fs::path& od_path, double pixel_pitch_um) {
  ArteryMask mask;
  mask.grid = read_binary_image(mask_path);
  mask.od = read_od_ellipse(od_path);
  mask.pixel_pitch_um = pixel_pitch_um;
  return mask;
}

struct SubjectOutcome {
  std::optional<FeatureSet> features;
  std::optional<FeatureSet> group_features;
  double group_p0 = 0.0;
  std::vector<StageFailure> failures;
};

}  // namespace

CenterlineGraph extract_subject(const fs::path& mask_path, const fs::path& od_path, double pixel_pitch_um) {
  return extract_graph(load_mask(mask_path, od_path, pixel_pitch_um));
}

std::vector<FeatureSet> read_feature_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<FeatureSet> out;
  for (const auto& f : files) out.push_back(feature_set_from_json(read_json(f)));
  return out;
}

PipelineReport run_pipeline(const PipelineConfig& config) {
  config.validate();
  const fs::path out = config.output_dir;
  for (const char* sub : {"graphs", "solutions", "features"}) fs::create_directories(out / sub);
  if (config.group_scenarios) fs::create_directories(out / "solutions_group");
  if (!config.overlay_field.empty()) fs::create_directories(out / "overlays");

  std::map<std::string, PatientInfo> patients;
  if (!config.labels_file.empty())
    for (auto& p : parse_labels(read_text(config.labels_file))) patients[p.subject_id] = p;

  const ScenarioParams params = config.scenario_params();
  const auto masks = find_masks(config.masks_dir);
  PipelineReport report;
  for (const auto& m : masks) report.subjects.push_back(m.stem().string());

  std::vector<SubjectOutcome> outcomes(masks.size());
  parallel_for(masks.size(), config.jobs, [&](std::size_t i) {
    const std::string id = report.subjects[i];
    SubjectOutcome& o = outcomes[i];
    std::string stage = "extract";
    try {
      const ArteryMask mask = load_mask(masks[i], config.od_dir / (id + ".json"), config.pixel_pitch_um);
      const CenterlineGraph graph = extract_graph(mask);
      write_json(out / "graphs" / (id + ".json"), to_json(graph));

      stage = "simulate";
      const HemodynamicSolution solution = simulate(graph, params);
      write_text(out / "solutions" / (id + ".tsv"), solution_table(solution));

      stage = "featurize";
      FeatureSet features = summarize(solution, graph);
      features.subject_id = id;
      auto patient = patients.find(id);
      if (patient != patients.end()) features.label = patient->second.label;
      write_json(out / "features" / (id + ".json"), to_json(features));
      o.features = features;

      if (!config.overlay_field.empty()) {
        stage = "render";
        const OverlayField field = overlay_field_from_string(config.overlay_field);
        write_png_rgb(out / "overlays" / (id + "_" + config.overlay_field + ".png"),
                      render_overlay(mask, graph, solution, field));
      }

      if (config.group_scenarios && patient != patients.end()) {
        stage = "simulate-group";
        const ScenarioParams group = *ScenarioParams::preset(patient->second.label > 0 ? "sc1" : "sc3");
        const HemodynamicSolution gs = simulate(graph, group);
        write_text(out / "solutions_group" / (id + ".tsv"), solution_table(gs));
        FeatureSet gf = summarize(gs, graph);
        gf.subject_id = id;
        gf.label = patient->second.label;
        o.group_features = gf;
        o.group_p0 = group.p0_mmhg;
      }
    } catch (const std::exception& e) {
      o.failures.push_back({id, stage, e.what()});
    }
  });

  std::vector<FeatureSet> labelled;
  std::vector<MeasurementRecord> records;
  std::vector<PatientInfo> analysed;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    auto& o = outcomes[i];
    for (auto& f : o.failures) report.failures.push_back(f);
    if (!o.features) continue;
    auto patient = patients.find(report.subjects[i]);
    if (patient == patients.end()) continue;
    labelled.push_back(*o.features);
    const FeatureSet& source = o.group_features ? *o.group_features : *o.features;
    const double p0 = o.group_features ? o.group_p0 : params.p0_mmhg;
    auto rec = measurement_records(source, patient->second, p0);
    records.insert(records.end(), rec.begin(), rec.end());
    analysed.push_back(patient->second);
  }

  if (!patients.empty()) {
    try {
      const LoocvOptions options = config.loocv_options();
      const LoocvResult result = loocv_evaluate(labelled, options);
      write_json(out / "metrics.json", to_json(result, options));
      report.auc = result.auc;
      const FoldResult final_fit = fit_fold(labelled, options, derive_seed(config.seed, 0xF1A1ULL));
      json model = to_json(final_fit.model);
      model["k"] = final_fit.k;
      model["lambda"] = round_sig(final_fit.lambda);
      write_json(out / "model.json", model);
    } catch (const std::exception& e) {
      report.failures.push_back({"", "evaluate", e.what()});
    }
    try {
      fs::create_directories(out / "analysis");
      write_text(out / "analysis" / "records.tsv", records_tsv(records));
      const CohortSummary summary = cohort_summary(records, analysed);
      const RadiusFlowResult rf = radius_flow_correlation(records);
      write_json(out / "analysis" / "summary.json", {{"cohort", to_json(summary)}, {"radius_flow", to_json(rf)}});
      write_text(out / "analysis" / "radius_flow.tsv", radius_flow_plot_data(records, rf));
    } catch (const std::exception& e) {
      report.failures.push_back({"", "analyze", e.what()});
    }
  }

  json failures = json::array();
  for (const auto& f : report.failures)
    failures.push_back({{"subject", f.subject_id}, {"stage", f.stage}, {"message", f.message}});
  write_json(out / "report.json", {{"subjects", report.subjects}, {"failures", failures}});
  return report;
}

}  // namespace retihemo
