#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zseg/autograd.hpp"

namespace zseg {

struct GradCheckEntry {
  std::string name;
  double relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  /// Probed coordinates where an unfrozen +-step pass would have switched a
  /// ReLU sign or pool winner. Informational.
  std::size_t kink_crossings = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  double max_relative_error() const;
  std::size_t checked() const;
  std::size_t kink_crossings() const;
  bool passed() const { return max_relative_error() < tolerance; }
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-3;
  /// Coordinates probed per leaf; 0 checks every coordinate.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 1;
  /// Replay the ReLU signs and max-pool winners of the base point in the
  /// perturbed passes (see BranchTape), so differences are taken on the
  /// smooth piece whose derivative backward computes.
  bool freeze_branches = true;
};

template <class T>
struct NamedLeaf {
  std::string name;
  BasicVar<T> leaf;
};

/// Compares reverse-mode gradients against central finite differences.
///
/// `forward` rebuilds the graph and returns its (possibly non-scalar)
/// output. The scalar under test is <output, R> for a fixed random R in
/// [-1, 1], accumulated in double for the finite-difference side. The
/// error reported per leaf is ||g_analytic - g_numeric|| / max(||g_analytic||,
/// ||g_numeric||) over the probed coordinates.
///
/// Without `freeze_branches`, a step that crosses a kink compares against a
/// secant across two pieces, which is not a gradient at all.
///
/// Instantiated for float and double; float32 rounding puts a floor of
/// roughly 1e-4 on the achievable error at step 1e-3, so tight tolerances
/// need the double instantiation.
template <class T>
GradCheckReport grad_check(const std::function<BasicVar<T>()>& forward,
                           std::vector<NamedLeaf<T>> leaves, const GradCheckOptions& options = {});

}  // namespace zseg
