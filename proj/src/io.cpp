#include "retihemo/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "retihemo/error.hpp"

namespace retihemo {

namespace fs = std::filesystem;
using nlohmann::json;

double round_sig(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  return std::stod(format_number(value));
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", kSignificantDigits, value);
  return buf;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

// Decodes any PNG into 8-bit RGB.
Raster<Rgb> decode_png(const fs::path& path) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw Error(ErrorCode::ParseError, path.string() + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error(ErrorCode::IoError, "libpng initialisation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ParseError, "corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buffer(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Raster<Rgb> img(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) img(r, c) = {rows[r][3 * c], rows[r][3 * c + 1], rows[r][3 * c + 2]};
  return img;
}

void encode_png(const fs::path& path, int width, int height, int color_type,
                const std::vector<png_byte>& pixels, int channels) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw Error(ErrorCode::IoError, "libpng initialisation failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

BinaryRaster read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    int v;
    while (in >> std::ws && in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
    }
    if (!(in >> v)) throw Error(ErrorCode::ParseError, "malformed PGM header in " + path.string());
    return v;
  };
  if (magic != "P2" && magic != "P5") throw Error(ErrorCode::ParseError, path.string() + " is not a PGM file");
  const int cols = next_int();
  const int rows = next_int();
  const int maxval = next_int();
  if (rows <= 0 || cols <= 0 || maxval <= 0) throw Error(ErrorCode::ParseError, "bad PGM dimensions");
  BinaryRaster img(rows, cols, 0);
  if (magic == "P2") {
    for (auto& v : img.data()) v = next_int() != 0;
  } else {
    in.get();
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<char> buf(static_cast<std::size_t>(rows) * cols * bytes);
    if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
      throw Error(ErrorCode::ParseError, "truncated PGM " + path.string());
    for (std::size_t i = 0; i < img.size(); ++i) {
      int v = static_cast<unsigned char>(buf[i * bytes]);
      if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(buf[i * bytes + 1]);
      img.data()[i] = v != 0;
    }
  }
  return img;
}

json pixel_list(const std::vector<Pixel>& pixels) {
  json arr = json::array();
  for (const auto& p : pixels) arr.push_back({p.row, p.col});
  return arr;
}

json number_list(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(round_sig(v));
  return arr;
}

std::vector<Pixel> pixels_from(const json& j) {
  std::vector<Pixel> out;
  for (const auto& p : j) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return out;
}

}  // namespace

BinaryRaster read_binary_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".PGM") return read_pgm(path);
  const Raster<Rgb> rgb = decode_png(path);
  BinaryRaster img(rgb.rows(), rgb.cols(), 0);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const Rgb& p = rgb.data()[i];
    img.data()[i] = (p.r | p.g | p.b) != 0;
  }
  return img;
}

Raster<Rgb> read_png_rgb(const fs::path& path) { return decode_png(path); }

void write_png_gray(const fs::path& path, const Raster<std::uint8_t>& img) {
  std::vector<png_byte> pixels(img.data().begin(), img.data().end());
  bool binary = true;
  for (auto v : pixels) binary = binary && v <= 1;
  if (binary)
    for (auto& v : pixels) v = v ? 255 : 0;
  encode_png(path, img.cols(), img.rows(), PNG_COLOR_TYPE_GRAY, pixels, 1);
}

void write_png_rgb(const fs::path& path, const Raster<Rgb>& img) {
  std::vector<png_byte> pixels;
  pixels.reserve(img.size() * 3);
  for (const auto& p : img.data()) {
    pixels.push_back(p.r);
    pixels.push_back(p.g);
    pixels.push_back(p.b);
  }
  encode_png(path, img.cols(), img.rows(), PNG_COLOR_TYPE_RGB, pixels, 3);
}

json to_json(const OdEllipse& od) {
  return {{"center_row", round_sig(od.center_row)},       {"center_col", round_sig(od.center_col)},
          {"semi_axis_row", round_sig(od.semi_axis_row)}, {"semi_axis_col", round_sig(od.semi_axis_col)},
          {"rotation_deg", round_sig(od.rotation_deg)}};
}

OdEllipse od_ellipse_from_json(const json& j) {
  try {
    OdEllipse od;
    od.center_row = j.at("center_row").get<double>();
    od.center_col = j.at("center_col").get<double>();
    od.semi_axis_row = j.at("semi_axis_row").get<double>();
    od.semi_axis_col = j.at("semi_axis_col").get<double>();
    od.rotation_deg = j.value("rotation_deg", 0.0);
    return od;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("optic disc record: ") + e.what());
  }
}

OdEllipse read_od_ellipse(const fs::path& path) { return od_ellipse_from_json(read_json(path)); }

json to_json(const CenterlineGraph& graph) {
  json trees = json::array();
  for (const auto& tree : graph.trees) {
    json vertices = json::array();
    for (const auto& v : tree.vertices) {
      vertices.push_back({{"kind", std::string(to_string(v.kind))},
                          {"position", {v.position.row, v.position.col}},
                          {"branching", v.branching},
                          {"parent_edge", v.parent_edge},
                          {"child_edges", v.child_edges},
                          {"pixels", pixel_list(v.pixels)},
                          {"radii_cm", number_list(v.radii_cm)}});
    }
    json edges = json::array();
    for (const auto& e : tree.edges) {
      edges.push_back({{"parent", e.parent},
                       {"child", e.child},
                       {"pixels", pixel_list(e.pixels)},
                       {"radii_cm", number_list(e.radii_cm)}});
    }
    trees.push_back({{"root", tree.root}, {"vertices", vertices}, {"edges", edges}});
  }
  return {{"format", "retihemo-graph"}, {"version", 1},
          {"rows", graph.rows},         {"cols", graph.cols},
          {"pixel_pitch_cm", round_sig(graph.pixel_pitch_cm)},
          {"trees", trees}};
}

CenterlineGraph graph_from_json(const json& j) {
  try {
    if (j.value("format", "") != "retihemo-graph")
      throw Error(ErrorCode::ParseError, "not a centerline graph document");
    CenterlineGraph g;
    g.rows = j.at("rows").get<int>();
    g.cols = j.at("cols").get<int>();
    g.pixel_pitch_cm = j.at("pixel_pitch_cm").get<double>();
    for (const auto& jt : j.at("trees")) {
      Tree t;
      t.root = jt.at("root").get<int>();
      for (const auto& jv : jt.at("vertices")) {
        Vertex v;
        const auto kind = vertex_kind_from_string(jv.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::ParseError, "unknown vertex kind");
        v.kind = *kind;
        v.position = {jv.at("position").at(0).get<int>(), jv.at("position").at(1).get<int>()};
        v.branching = jv.value("branching", false);
        v.parent_edge = jv.at("parent_edge").get<int>();
        v.child_edges = jv.at("child_edges").get<std::vector<int>>();
        v.pixels = pixels_from(jv.at("pixels"));
        v.radii_cm = jv.at("radii_cm").get<std::vector<double>>();
        t.vertices.push_back(std::move(v));
      }
      for (const auto& je : jt.at("edges")) {
        Edge e;
        e.parent = je.at("parent").get<int>();
        e.child = je.at("child").get<int>();
        e.pixels = pixels_from(je.at("pixels"));
        e.radii_cm = je.at("radii_cm").get<std::vector<double>>();
        t.edges.push_back(std::move(e));
      }
      g.trees.push_back(std::move(t));
    }
    if (auto problem = check_graph(g); !problem.empty()) throw Error(ErrorCode::ParseError, problem);
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("graph document: ") + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace retihemo
