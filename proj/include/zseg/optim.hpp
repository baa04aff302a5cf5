#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zseg/layers.hpp"
#include "zseg/models.hpp"

namespace zseg {

enum class OptimizerKind { sgd_momentum, adam };

std::string to_string(OptimizerKind kind);

struct LrStep {
  int epoch = 0;
  double multiplier = 1.0;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 8;
  int epochs = 50;
  /// Multipliers applied cumulatively from the listed epoch onward (0-based).
  std::vector<LrStep> schedule;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// Learning rate in effect during `epoch` (0-based).
double apply_lr_schedule(const OptimizerConfig& config, int epoch);

/// Training defaults per network. For pix2pix the segmenter role is the
/// generator.
OptimizerConfig default_optimizer(Architecture arch, NetworkRole role = NetworkRole::segmenter);

/// v <- momentum * v + (g + wd * w); w <- w - lr * v; then clears grads.
/// Throws InvariantError if a trainable parameter has no gradient.
template <class T>
void sgd_momentum_step(BasicParameterSet<T>& params, const OptimizerConfig& config, double lr);

/// Adam with bias correction; `iteration` counts from 1. Clears grads.
template <class T>
void adam_step(BasicParameterSet<T>& params, const OptimizerConfig& config, double lr,
               std::uint64_t iteration);

/// Stateful wrapper: tracks the step counter and dispatches on the kind.
template <class T>
class BasicOptimizer {
public:
  BasicOptimizer(BasicParameterSet<T>& params, OptimizerConfig config);

  void step(int epoch);
  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t steps) { steps_ = steps; }

private:
  BasicParameterSet<T>* params_;
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
};

using Optimizer = BasicOptimizer<float>;

}  // namespace zseg
