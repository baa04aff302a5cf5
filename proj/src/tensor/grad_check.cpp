#include "zseg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "zseg/ops.hpp"
#include "zseg/rng.hpp"

namespace zseg {

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.relative_error);
  return worst;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.coordinates_checked;
  return n;
}

std::size_t GradCheckReport::kink_crossings() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.kink_crossings;
  return n;
}

namespace {

template <class T>
double projected(const BasicTensor<T>& out, const BasicTensor<T>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) acc += static_cast<double>(out[i]) * weights[i];
  return acc;
}

}  // namespace

template <class T>
GradCheckReport grad_check(const std::function<BasicVar<T>()>& forward,
                           std::vector<NamedLeaf<T>> leaves, const GradCheckOptions& options) {
  Rng rng(options.seed);
  BranchTape tape;
  tape.install(BranchTape::Mode::record);
  BasicVar<T> probe = forward();
  tape.uninstall();

  BasicTensor<T> weights(probe.shape());
  for (auto& v : weights.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  // Projected output; with frozen branches the pass replays the decisions
  // taken at the base point. Returns false when a free pass would have
  // taken a different branch.
  auto evaluate = [&](double& out) {
    NoGradGuard guard;
    if (!options.freeze_branches) {
      out = projected(forward().value(), weights);
      return true;
    }
    tape.install(BranchTape::Mode::replay);
    out = projected(forward().value(), weights);
    tape.uninstall();
    return !tape.diverged();
  };
  for (auto& leaf : leaves) leaf.leaf.zero_grad();
  backward(weighted_sum(probe, weights));

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (auto& leaf : leaves) {
    BasicTensor<T> analytic = leaf.leaf.grad();
    BasicTensor<T>& value = leaf.leaf.mutable_value();
    std::vector<std::size_t> coords(value.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coordinates > 0 && coords.size() > options.max_coordinates) {
      rng.shuffle(coords);
      coords.resize(options.max_coordinates);
      std::sort(coords.begin(), coords.end());
    }
    double diff_sq = 0.0;
    double analytic_sq = 0.0;
    double numeric_sq = 0.0;
    std::size_t crossed = 0;
    for (std::size_t j : coords) {
      const T original = value[j];
      const T plus = static_cast<T>(original + options.step);
      const T minus = static_cast<T>(original - options.step);
      double f_plus = 0.0;
      double f_minus = 0.0;
      value[j] = plus;
      bool smooth = evaluate(f_plus);
      value[j] = minus;
      smooth = evaluate(f_minus) && smooth;
      value[j] = original;
      if (!smooth) ++crossed;
      const double numeric = (f_plus - f_minus) / (static_cast<double>(plus) - minus);
      const double a = analytic[j];
      diff_sq += (a - numeric) * (a - numeric);
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
    }
    const double scale = std::max(std::sqrt(analytic_sq), std::sqrt(numeric_sq));
    GradCheckEntry entry;
    entry.name = leaf.name;
    entry.coordinates_checked = coords.size();
    entry.kink_crossings = crossed;
    entry.relative_error = scale < 1e-12 ? 0.0 : std::sqrt(diff_sq) / scale;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

template GradCheckReport grad_check<float>(const std::function<BasicVar<float>()>&,
                                           std::vector<NamedLeaf<float>>, const GradCheckOptions&);
template GradCheckReport grad_check<double>(const std::function<BasicVar<double>()>&,
                                            std::vector<NamedLeaf<double>>,
                                            const GradCheckOptions&);

}  // namespace zseg
