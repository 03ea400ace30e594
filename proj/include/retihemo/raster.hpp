#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace retihemo {

/// Integer pixel coordinate (row-major).
struct Pixel {
  int row = 0;
  int col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// 8-neighbourhood offsets in clockwise order starting north.
inline constexpr std::array<Pixel, 8> kNeighbours8{{
    {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

/// Dense 2-D grid of values.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }
  bool contains(Pixel p) const { return contains(p.row, p.col); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](Pixel p) { return data_[index(p.row, p.col)]; }
  const T& operator[](Pixel p) const { return data_[index(p.row, p.col)]; }

  /// Out-of-range reads return the fill value.
  T at_or(int r, int c, T outside) const { return contains(r, c) ? (*this)(r, c) : outside; }

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using BinaryRaster = Raster<std::uint8_t>;

/// Number of set 8-neighbours of `p`.
inline int count_neighbours(const BinaryRaster& img, Pixel p) {
  int n = 0;
  for (const auto& d : kNeighbours8) n += img.at_or(p.row + d.row, p.col + d.col, 0) != 0;
  return n;
}

inline std::size_t count_foreground(const BinaryRaster& img) {
  std::size_t n = 0;
  for (auto v : img.data()) n += v != 0;
  return n;
}

/// 8-connected component labelling in raster order. Labels start at 1; 0 is background.
Raster<int> label_components(const BinaryRaster& img, int* num_components = nullptr);

}  // namespace retihemo
