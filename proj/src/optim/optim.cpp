#include "zseg/optim.hpp"

#include <cmath>

#include "zseg/errors.hpp"

namespace zseg {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].epoch < 0 || !(schedule[i].multiplier > 0.0)) {
      throw ConfigError("schedule entries need epoch >= 0 and multiplier > 0");
    }
    if (i > 0 && schedule[i].epoch <= schedule[i - 1].epoch) {
      throw ConfigError("schedule epochs must be strictly increasing");
    }
  }
}

double apply_lr_schedule(const OptimizerConfig& config, int epoch) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  double lr = config.lr;
  for (const auto& s : config.schedule) {
    if (epoch >= s.epoch) lr *= s.multiplier;
  }
  return lr;
}

OptimizerConfig default_optimizer(Architecture arch, NetworkRole role) {
  OptimizerConfig c;
  switch (arch) {
    case Architecture::segnet:
    case Architecture::unet:
      c.kind = OptimizerKind::sgd_momentum;
      c.lr = 0.01;
      c.momentum = 0.9;
      c.weight_decay = 5e-4;
      c.batch_size = arch == Architecture::segnet ? 8 : 4;
      c.epochs = 50;
      c.schedule = {{20, 0.2}, {40, 0.2}};
      break;
    case Architecture::pix2pix:
      c.kind = OptimizerKind::adam;
      c.momentum = 0.0;
      c.weight_decay = 0.0;
      c.batch_size = 12;
      c.epochs = 50;
      if (role == NetworkRole::discriminator) {
        c.lr = 2e-4;
      } else {
        c.lr = 1e-2;
        c.schedule = {{20, 0.1}, {40, 0.1}};
      }
      break;
  }
  return c;
}

namespace {

template <class T>
const BasicTensor<T>& gradient_of(BasicParameter<T>& p) {
  if (!p.value.has_grad()) {
    throw InvariantError("optimizer step: parameter " + p.name + " has no gradient");
  }
  return p.value.grad();
}

}  // namespace

template <class T>
void sgd_momentum_step(BasicParameterSet<T>& params, const OptimizerConfig& config, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) gradient_of(params[i]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const BasicTensor<T>& g = p.value.grad();
    BasicTensor<T>& w = p.value.mutable_value();
    for (std::size_t j = 0; j < w.numel(); ++j) {
      const double v = config.momentum * p.velocity[j] + (g[j] + config.weight_decay * w[j]);
      p.velocity[j] = static_cast<T>(v);
      w[j] = static_cast<T>(w[j] - lr * v);
    }
  }
  params.zero_grad();
}

template <class T>
void adam_step(BasicParameterSet<T>& params, const OptimizerConfig& config, double lr,
               std::uint64_t iteration) {
  if (iteration < 1) throw InvariantError("adam_step: iteration counts from 1");
  for (std::size_t i = 0; i < params.size(); ++i) gradient_of(params[i]);
  const double t = static_cast<double>(iteration);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const BasicTensor<T>& grad = p.value.grad();
    BasicTensor<T>& w = p.value.mutable_value();
    for (std::size_t j = 0; j < w.numel(); ++j) {
      const double g = grad[j] + config.weight_decay * w[j];
      const double m = config.beta1 * p.moment1[j] + (1.0 - config.beta1) * g;
      const double v = config.beta2 * p.moment2[j] + (1.0 - config.beta2) * g * g;
      p.moment1[j] = static_cast<T>(m);
      p.moment2[j] = static_cast<T>(v);
      w[j] = static_cast<T>(w[j] - lr * (m / c1) / (std::sqrt(v / c2) + config.epsilon));
    }
  }
  params.zero_grad();
}

template <class T>
BasicOptimizer<T>::BasicOptimizer(BasicParameterSet<T>& params, OptimizerConfig config)
    : params_(&params), config_(std::move(config)) {
  config_.validate();
}

template <class T>
void BasicOptimizer<T>::step(int epoch) {
  const double lr = apply_lr_schedule(config_, epoch);
  ++steps_;
  if (config_.kind == OptimizerKind::adam) {
    adam_step(*params_, config_, lr, steps_);
  } else {
    sgd_momentum_step(*params_, config_, lr);
  }
}

template void sgd_momentum_step<float>(BasicParameterSet<float>&, const OptimizerConfig&, double);
template void sgd_momentum_step<double>(BasicParameterSet<double>&, const OptimizerConfig&, double);
template void adam_step<float>(BasicParameterSet<float>&, const OptimizerConfig&, double,
                               std::uint64_t);
template void adam_step<double>(BasicParameterSet<double>&, const OptimizerConfig&, double,
                                std::uint64_t);
template class BasicOptimizer<float>;
template class BasicOptimizer<double>;

}  // namespace zseg
