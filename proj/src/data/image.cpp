#include "zseg/image.hpp"

#include <algorithm>

namespace zseg {

std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

std::size_t count_outside(const Mask& inner, const Mask& outer) {
  require_same_shape(inner, outer, "count_outside");
  std::size_t n = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) n += inner[i] && !outer[i];
  return n;
}

bool is_subset(const Mask& inner, const Mask& outer) { return count_outside(inner, outer) == 0; }

namespace {
template <class F>
Mask combine(const Mask& a, const Mask& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Mask out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i] != 0, b[i] != 0) ? 1 : 0;
  return out;
}
}  // namespace

Mask mask_and(const Mask& a, const Mask& b) {
  return combine(a, b, "mask_and", [](bool x, bool y) { return x && y; });
}
Mask mask_and_not(const Mask& a, const Mask& b) {
  return combine(a, b, "mask_and_not", [](bool x, bool y) { return x && !y; });
}
Mask mask_or(const Mask& a, const Mask& b) {
  return combine(a, b, "mask_or", [](bool x, bool y) { return x || y; });
}

Image normalize_min_max(const Image& image) {
  Image out(image.height(), image.width());
  if (image.empty()) return out;
  const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
  const double min = *lo;
  const double range = static_cast<double>(*hi) - min;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<float>((image[i] - min) / range);
  }
  return out;
}

}  // namespace zseg
