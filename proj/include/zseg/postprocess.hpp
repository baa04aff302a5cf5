#pragma once

#include <cstddef>

#include "zseg/image.hpp"

namespace zseg {

/// Zonal delineation of one slice. By construction wg == cg | pz and cg & pz is empty.
struct ZonalMask {
  Mask wg;
  Mask cg;
  Mask pz;
};

/// logit > 0 (sigmoid strictly above 0.5), then restricted to the gland.
Mask binarize(const Image& logits, const Mask& wg);

/// Background pixels that cannot reach the border through 4-connected
/// background become foreground.
Mask fill_holes(const Mask& mask);

/// floor(|wg| / 8): components smaller than this are dropped.
std::size_t small_component_threshold(const Mask& wg);

/// Drops 8-connected components of `mask` with area below the threshold of `wg`.
Mask remove_small_components(const Mask& mask, const Mask& wg);

/// pz = wg minus cg. Throws InvariantError if cg leaks outside wg.
ZonalMask derive_pz(const Mask& wg, const Mask& cg);

/// binarize -> fill_holes -> remove_small_components -> derive_pz.
/// Hole filling can reach outside the gland only if the gland itself has
/// holes, so the filled mask is intersected with wg again before subtraction.
ZonalMask postprocess(const Image& cg_logits, const Mask& wg);

/// Pixels breaking wg == cg | pz or cg & pz == empty.
std::size_t zonal_violations(const ZonalMask& z);

}  // namespace zseg
