#pragma once

#include <cstdint>

#include "zseg/rng.hpp"
#include "zseg/tensor.hpp"

namespace zseg::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace zseg::testing
