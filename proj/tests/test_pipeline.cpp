#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "retihemo/error.hpp"
#include "retihemo/pipeline.hpp"
#include "retihemo/synth.hpp"

using namespace retihemo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("retihemo_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Straight synthetic vessel with its mask.
struct Tube {
  CenterlineGraph graph;
  ArteryMask mask;
};

Tube tube() {
  SynthSpec spec;
  spec.depth = 0;
  spec.root_radius_cm = 30e-4;
  Tube t;
  t.graph = generate_tree(spec);
  t.mask = rasterize(t.graph);
  return t;
}

void write_cohort(const fs::path& dir, int per_class) {
  std::vector<PatientInfo> patients;
  for (const auto& s : generate_cohort_subjects(per_class, {30, 80}, 4)) {
    const ArteryMask m = rasterize(s.graph);
    write_png_gray(dir / "masks" / (s.patient.subject_id + ".png"), m.grid);
    write_json(dir / "od" / (s.patient.subject_id + ".json"), to_json(m.od));
    patients.push_back(s.patient);
  }
  write_text(dir / "labels.csv", labels_csv(patients));
}

PipelineConfig small_config(const fs::path& dir, const fs::path& out) {
  PipelineConfig c;
  c.masks_dir = dir / "masks";
  c.od_dir = dir / "od";
  c.labels_file = dir / "labels.csv";
  c.output_dir = out;
  c.k_grid = {2, 3};
  c.lambda_grid = {0.1, 10};
  c.kmeans_restarts = 3;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(Colormap, FixedStops) {
  EXPECT_EQ(colormap(0.0), (Rgb{0, 0, 255}));
  EXPECT_EQ(colormap(0.5), (Rgb{0, 255, 0}));
  EXPECT_EQ(colormap(1.0), (Rgb{255, 0, 0}));
  EXPECT_EQ(colormap(-3.0), colormap(0.0));
  EXPECT_EQ(colormap(7.0), colormap(1.0));
}

TEST(Overlay, ConstantFieldIsSingleColour) {
  const Tube t = tube();
  const auto sol = simulate(t.graph, *ScenarioParams::preset("sc2"));
  const auto img = render_overlay(t.mask, t.graph, sol, OverlayField::Q);
  EXPECT_EQ(img.rows(), t.mask.grid.rows());
  EXPECT_EQ(img.cols(), t.mask.grid.cols());
  for (const auto& p : t.graph.trees[0].edges[0].pixels) EXPECT_EQ(img[p], colormap(0.5));
}

TEST(Overlay, PressureGradientAlongTube) {
  const Tube t = tube();
  const auto sol = simulate(t.graph, *ScenarioParams::preset("sc2"));
  const auto img = render_overlay(t.mask, t.graph, sol, OverlayField::P);
  const auto& pixels = t.graph.trees[0].edges[0].pixels;
  const double hi = sol.pixels.front().p_mmhg, lo = sol.pixels.back().p_mmhg;
  double prev_t = 2.0;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double tt = (sol.pixels[i].p_mmhg - lo) / (hi - lo);
    EXPECT_LT(tt, prev_t);
    prev_t = tt;
    EXPECT_EQ(img[pixels[i]], colormap(tt));
  }
  EXPECT_EQ(img[pixels.front()], colormap(1.0));
  EXPECT_EQ(img[pixels.back()], colormap(0.0));
  EXPECT_EQ(img(0, 0), kOverlayBackground);
}

TEST(Overlay, UnknownFieldThrows) {
  try {
    overlay_field_from_string("pressure");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidField);
  }
  for (const char* f : {"P", "Q", "v", "Re", "WSS", "R"}) EXPECT_EQ(to_string(overlay_field_from_string(f)), f);
}

TEST(FeatureFile, RoundTrip) {
  const auto cohort = generate_cohort(1, {30, 80}, 2);
  const auto j = to_json(cohort[0]);
  const FeatureSet back = feature_set_from_json(j);
  EXPECT_EQ(back.subject_id, cohort[0].subject_id);
  EXPECT_EQ(back.elements.size(), cohort[0].elements.size());
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Config, JsonResolvesRelativePaths) {
  const auto j = nlohmann::json::parse(R"({"masks": "m", "od": "/abs/od", "scenario": "sc3", "seed": 4,
                                           "k_grid": [2, 5], "jobs": 2, "overlay_field": "WSS"})");
  const PipelineConfig c = pipeline_config_from_json(j, "/data");
  EXPECT_EQ(c.masks_dir, fs::path("/data/m"));
  EXPECT_EQ(c.od_dir, fs::path("/abs/od"));
  EXPECT_EQ(c.scenario_params().qt_ul_min, 80.0);
  EXPECT_EQ(c.k_grid, (std::vector<int>{2, 5}));
  EXPECT_EQ(c.jobs, 2);
  EXPECT_EQ(c.overlay_field, "WSS");
}

TEST(Config, ValidationErrors) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir / "m");
  PipelineConfig c;
  c.masks_dir = dir / "missing";
  c.od_dir = dir / "m";
  EXPECT_THROW(c.validate(), Error);
  c.masks_dir = dir / "m";
  c.validate();
  c.scenario = "sc9";
  EXPECT_THROW(c.validate(), Error);
  c.scenario = "sc1";
  c.overlay_field = "X";
  EXPECT_THROW(c.validate(), Error);
}

TEST(RunPipeline, WritesArtifactsAndIsReproducible) {
  const fs::path dir = scratch("run");
  write_cohort(dir, 3);
  const auto report = run_pipeline(small_config(dir, dir / "out1"));
  ASSERT_TRUE(report.ok()) << report.failures.front().message;
  EXPECT_EQ(report.subjects.size(), 6u);
  for (const auto& id : report.subjects) {
    EXPECT_TRUE(fs::exists(dir / "out1" / "graphs" / (id + ".json")));
    EXPECT_TRUE(fs::exists(dir / "out1" / "solutions" / (id + ".tsv")));
    EXPECT_TRUE(fs::exists(dir / "out1" / "features" / (id + ".json")));
    EXPECT_TRUE(fs::exists(dir / "out1" / "overlays" / (id + "_P.png")));
  }
  const auto metrics = read_json(dir / "out1" / "metrics.json");
  EXPECT_TRUE(metrics.contains("auc"));
  EXPECT_TRUE(fs::exists(dir / "out1" / "model.json"));
  EXPECT_TRUE(fs::exists(dir / "out1" / "analysis" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "out1" / "analysis" / "radius_flow.tsv"));

  run_pipeline(small_config(dir, dir / "out2"));
  EXPECT_EQ(slurp(dir / "out1" / "metrics.json"), slurp(dir / "out2" / "metrics.json"));
  EXPECT_EQ(slurp(dir / "out1" / "analysis" / "summary.json"), slurp(dir / "out2" / "analysis" / "summary.json"));
  EXPECT_EQ(slurp(dir / "out1" / "solutions" / "syn000.tsv"), slurp(dir / "out2" / "solutions" / "syn000.tsv"));
}

TEST(RunPipeline, CollectsPerSubjectFailures) {
  const fs::path dir = scratch("fail");
  write_cohort(dir, 3);
  write_text(dir / "masks" / "broken.png", "not a png");
  PipelineConfig c = small_config(dir, dir / "out");
  c.overlay_field.clear();
  const auto report = run_pipeline(c);
  EXPECT_FALSE(report.ok());
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].subject_id, "broken");
  EXPECT_EQ(report.failures[0].stage, "extract");
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.json"));
  EXPECT_FALSE(fs::exists(dir / "out" / "overlays"));
}
