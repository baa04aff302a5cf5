#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "zseg/errors.hpp"

namespace zseg {

/// Row-major 2D array.
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(int height, int width, T fill = T{}) : h_(height), w_(width) {
    if (height < 0 || width < 0) throw ShapeError("negative grid size");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }
  Grid(int height, int width, std::vector<T> data) : h_(height), w_(width), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(height) * width) {
      throw ShapeError("grid data length does not match " + std::to_string(height) + "x" +
                       std::to_string(width));
    }
  }

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Grid& o) const { return h_ == o.h_ && w_ == o.w_; }
  template <class U>
  bool same_shape(const Grid<U>& o) const {
    return h_ == o.height() && w_ == o.width();
  }
  std::string shape_str() const { return std::to_string(h_) + "x" + std::to_string(w_); }

  T& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  const T& at(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid& o) const = default;

private:
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

using Image = Grid<float>;
/// Binary mask, values 0 or 1.
using Mask = Grid<std::uint8_t>;

std::size_t count(const Mask& m);
/// True when every foreground pixel of `inner` is foreground in `outer`.
bool is_subset(const Mask& inner, const Mask& outer);
/// Foreground pixels of `inner` outside `outer`.
std::size_t count_outside(const Mask& inner, const Mask& outer);
Mask mask_and(const Mask& a, const Mask& b);
Mask mask_and_not(const Mask& a, const Mask& b);
Mask mask_or(const Mask& a, const Mask& b);

/// Per-slice min-max scaling to [0, 1]; a constant image maps to zeros.
Image normalize_min_max(const Image& image);

template <class T, class U>
void require_same_shape(const Grid<T>& a, const Grid<U>& b, const std::string& where) {
  if (!a.same_shape(b)) {
    throw ShapeError(where + ": shape " + a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace zseg
