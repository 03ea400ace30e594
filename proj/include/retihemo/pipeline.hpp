#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "retihemo/analysis.hpp"
#include "retihemo/bohf.hpp"
#include "retihemo/hemo.hpp"
#include "retihemo/io.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

// ---- overlays -------------------------------------------------------------

enum class OverlayField { P, Q, v, Re, WSS, R };

/// Throws InvalidField for anything other than P, Q, v, Re, WSS, R.
OverlayField overlay_field_from_string(std::string_view s);
std::string_view to_string(OverlayField field);
double field_value(const PixelState& s, OverlayField field);

/// Fixed five-stop colormap: t = 0 blue, 0.25 cyan, 0.5 green, 0.75 yellow,
/// 1 red, linear in between. t is clamped to [0, 1].
Rgb colormap(double t);

inline constexpr Rgb kOverlayBackground{0, 0, 0};
inline constexpr Rgb kOverlayVessel{96, 96, 96};

/// Mask pixels grey, centreline pixels coloured over the field's min-max
/// range (a constant field maps to t = 0.5).
Raster<Rgb> render_overlay(const ArteryMask& mask, const CenterlineGraph& graph, const HemodynamicSolution& solution,
                           OverlayField field);

// ---- feature files ---------------------------------------------------------

nlohmann::json to_json(const FeatureSet& set);
FeatureSet feature_set_from_json(const nlohmann::json& j);

// ---- pipeline ---------------------------------------------------------------

/// Environment variable naming the default data directory (masks/, od/,
/// labels.csv below it).
inline constexpr const char* kDataDirEnv = "RETIHEMO_DATA";

struct PipelineConfig {
  std::filesystem::path masks_dir;
  std::filesystem::path od_dir;
  std::filesystem::path labels_file;
  std::filesystem::path output_dir = "retihemo_out";
  std::string scenario = "sc2";
  std::optional<double> qt_ul_min;
  std::optional<double> p0_mmhg;
  std::optional<double> gamma;
  std::uint64_t seed = 0;
  std::vector<int> k_grid = LoocvOptions{}.k_grid;
  std::vector<double> lambda_grid = LoocvOptions{}.lambda_grid;
  int kmeans_restarts = 50;
  std::string overlay_field = "P";  // empty disables overlays
  double pixel_pitch_um = 6.0;
  int jobs = 1;
  bool group_scenarios = true;  // analysis under SC1 (glaucomatous) / SC3 (healthy)

  /// Throws InvalidArgument / IoError.
  void validate() const;
  ScenarioParams scenario_params() const;
  LoocvOptions loocv_options() const;
};

/// Keys mirror the field names; relative paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const PipelineConfig& config);

/// Fills empty input paths from the data-directory environment variable.
void apply_data_dir_defaults(PipelineConfig& config);

struct StageFailure {
  std::string subject_id;  // empty for cohort stages
  std::string stage;
  std::string message;
};

struct PipelineReport {
  std::vector<std::string> subjects;
  std::vector<StageFailure> failures;
  std::optional<double> auc;

  bool ok() const { return failures.empty(); }
};

/// Mask files (.png, .pgm) in `dir`, sorted by subject id (file stem).
std::vector<std::filesystem::path> find_masks(const std::filesystem::path& dir);

CenterlineGraph extract_subject(const std::filesystem::path& mask_path, const std::filesystem::path& od_path,
                                double pixel_pitch_um);

/// Writes graphs/, solutions/, features/, overlays/, metrics.json, model.json
/// and analysis/ below the output directory.
PipelineReport run_pipeline(const PipelineConfig& config);

std::vector<FeatureSet> read_feature_dir(const std::filesystem::path& dir);

}  // namespace retihemo
