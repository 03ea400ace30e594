#include <array>
#include <vector>

#include "retihemo/error.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

namespace {

std::array<int, 8> neighbourhood(const BinaryRaster& img, int r, int c) {
  std::array<int, 8> n{};
  for (int k = 0; k < 8; ++k) {
    n[k] = img.at_or(r + kNeighbours8[k].row, c + kNeighbours8[k].col, 0) != 0;
  }
  return n;
}

// Yokoi connectivity number for 8-connected foreground. A foreground pixel is
// simple iff this equals 1.
int connectivity_number(const std::array<int, 8>& n) {
  int cn = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - n[k];
    const int b = 1 - n[(k + 1) % 8];
    const int c = 1 - n[(k + 2) % 8];
    cn += a - a * b * c;
  }
  return cn;
}

bool deletable(const std::array<int, 8>& n) {
  int count = 0;
  for (int v : n) count += v;
  return count >= 2 && connectivity_number(n) == 1;
}

}  // namespace

Raster<int> label_components(const BinaryRaster& img, int* num_components) {
  Raster<int> labels(img.rows(), img.cols(), 0);
  int next = 0;
  std::vector<Pixel> stack;
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      if (!img(r, c) || labels(r, c)) continue;
      ++next;
      labels(r, c) = next;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (const auto& d : kNeighbours8) {
          const Pixel q{p.row + d.row, p.col + d.col};
          if (img.contains(q) && img[q] && !labels[q]) {
            labels[q] = next;
            stack.push_back(q);
          }
        }
      }
    }
  }
  if (num_components) *num_components = next;
  return labels;
}

BinaryRaster skeletonize(const BinaryRaster& mask) {
  if (count_foreground(mask) == 0) throw Error(ErrorCode::EmptyInput, "mask has no foreground");

  BinaryRaster img(mask.rows(), mask.cols(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data()[i] = mask.data()[i] != 0;

  // Directional sub-iterations (N, S, E, W). Candidates are collected in
  // parallel and then re-validated one by one, so every deletion removes a
  // simple point and topology is preserved.
  constexpr std::array<int, 4> kDirections{0, 4, 2, 6};
  std::vector<Pixel> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int dir : kDirections) {
      candidates.clear();
      for (int r = 0; r < img.rows(); ++r) {
        for (int c = 0; c < img.cols(); ++c) {
          if (!img(r, c)) continue;
          const auto n = neighbourhood(img, r, c);
          if (n[dir] == 0 && deletable(n)) candidates.push_back({r, c});
        }
      }
      for (const Pixel p : candidates) {
        if (deletable(neighbourhood(img, p.row, p.col))) {
          img[p] = 0;
          changed = true;
        }
      }
    }
  }
  return img;
}

BinaryRaster skeletonize(const ArteryMask& mask) {
  mask.validate();
  return skeletonize(mask.grid);
}

}  // namespace retihemo
