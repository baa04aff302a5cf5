#include "zseg/postprocess.hpp"

#include <array>
#include <utility>
#include <vector>

#include "zseg/errors.hpp"

namespace zseg {

Mask binarize(const Image& logits, const Mask& wg) {
  require_same_shape(logits, wg, "binarize");
  Mask out(logits.height(), logits.width());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] > 0.0f && wg[i] ? 1 : 0;
  return out;
}

Mask fill_holes(const Mask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  // Start from all-foreground and carve out the background reachable from the border.
  Mask out(h, w, 1);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int y, int x) {
    if (!mask.at(y, x) && out.at(y, x)) {
      out.at(y, x) = 0;
      stack.emplace_back(y, x);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(0, x);
    seed(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    seed(y, 0);
    seed(y, w - 1);
  }
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    if (y > 0) seed(y - 1, x);
    if (y + 1 < h) seed(y + 1, x);
    if (x > 0) seed(y, x - 1);
    if (x + 1 < w) seed(y, x + 1);
  }
  return out;
}

std::size_t small_component_threshold(const Mask& wg) { return count(wg) / 8; }

Mask remove_small_components(const Mask& mask, const Mask& wg) {
  require_same_shape(mask, wg, "remove_small_components");
  const std::size_t threshold = small_component_threshold(wg);
  const int h = mask.height();
  const int w = mask.width();
  Mask out = mask;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::size_t> component;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    component.assign(1, start);
    seen[start] = 1;
    for (std::size_t k = 0; k < component.size(); ++k) {
      const int y = static_cast<int>(component[k]) / w;
      const int x = static_cast<int>(component[k]) % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy;
          const int nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (mask[j] && !seen[j]) {
            seen[j] = 1;
            component.push_back(j);
          }
        }
      }
    }
    if (component.size() < threshold) {
      for (std::size_t j : component) out[j] = 0;
    }
  }
  return out;
}

ZonalMask derive_pz(const Mask& wg, const Mask& cg) {
  require_same_shape(wg, cg, "derive_pz");
  const std::size_t leaked = count_outside(cg, wg);
  if (leaked != 0) {
    throw InvariantError(std::to_string(leaked) + " CG pixels outside the WG after post-processing");
  }
  return ZonalMask{wg, cg, mask_and_not(wg, cg)};
}

ZonalMask postprocess(const Image& cg_logits, const Mask& wg) {
  Mask cg = binarize(cg_logits, wg);
  cg = mask_and(fill_holes(cg), wg);
  cg = remove_small_components(cg, wg);
  return derive_pz(wg, cg);
}

std::size_t zonal_violations(const ZonalMask& z) {
  require_same_shape(z.wg, z.cg, "zonal_violations");
  require_same_shape(z.wg, z.pz, "zonal_violations");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < z.wg.size(); ++i) {
    const bool cover = (z.cg[i] || z.pz[i]) == (z.wg[i] != 0);
    const bool disjoint = !(z.cg[i] && z.pz[i]);
    if (!cover || !disjoint) ++bad;
  }
  return bad;
}

}  // namespace zseg
