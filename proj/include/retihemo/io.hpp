#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "retihemo/raster.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

/// Persisted numbers carry 12 significant digits.
inline constexpr int kSignificantDigits = 12;

/// Rounds to `kSignificantDigits` so that JSON output stays stable.
double round_sig(double value);
/// Formats with `kSignificantDigits` significant digits (printf %.12g).
std::string format_number(double value);

/// Reads a single-channel raster. PNG (8/16-bit, gray or colour; any nonzero
/// channel counts) and binary/ascii PGM are supported. Nonzero -> 1.
BinaryRaster read_binary_image(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG (0/255 for binary rasters).
void write_png_gray(const std::filesystem::path& path, const Raster<std::uint8_t>& img);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};
void write_png_rgb(const std::filesystem::path& path, const Raster<Rgb>& img);
Raster<Rgb> read_png_rgb(const std::filesystem::path& path);

nlohmann::json to_json(const OdEllipse& od);
OdEllipse od_ellipse_from_json(const nlohmann::json& j);
OdEllipse read_od_ellipse(const std::filesystem::path& path);

nlohmann::json to_json(const CenterlineGraph& graph);
CenterlineGraph graph_from_json(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace retihemo
