#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "zseg/ops.hpp"
#include "zseg/rng.hpp"

namespace zseg {

/// Trainable tensor plus optimizer state, shape-locked to the value.
template <class T>
struct BasicParameter {
  std::string name;
  BasicVar<T> value;
  BasicTensor<T> velocity;  // SGD momentum
  BasicTensor<T> moment1;   // Adam
  BasicTensor<T> moment2;   // Adam

  BasicParameter(std::string name_, BasicTensor<T> init)
      : name(std::move(name_)),
        velocity(init.shape()),
        moment1(init.shape()),
        moment2(init.shape()) {
    value = BasicVar<T>(std::move(init), true);
  }
};

/// Non-trainable state that still belongs to a checkpoint (running stats).
template <class T>
struct BasicBuffer {
  std::string name;
  BasicTensor<T> value;
};

/// Owns the parameters and buffers of one network in registration order.
/// Element addresses are stable, so layers keep raw pointers into it.
template <class T>
class BasicParameterSet {
public:
  BasicParameter<T>& add(const std::string& name, BasicTensor<T> init);
  BasicTensor<T>& add_buffer(const std::string& name, BasicTensor<T> init);

  std::size_t size() const { return params_.size(); }
  BasicParameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const BasicParameter<T>& operator[](std::size_t i) const { return *params_[i]; }
  std::size_t buffer_count() const { return buffers_.size(); }
  BasicBuffer<T>& buffer(std::size_t i) { return *buffers_[i]; }
  const BasicBuffer<T>& buffer(std::size_t i) const { return *buffers_[i]; }

  BasicParameter<T>* find(const std::string& name);
  BasicBuffer<T>* find_buffer(const std::string& name);

  /// Sum of parameter element counts.
  std::size_t scalar_count() const;
  void zero_grad();

private:
  std::vector<std::unique_ptr<BasicParameter<T>>> params_;
  std::vector<std::unique_ptr<BasicBuffer<T>>> buffers_;
};

/// Square-kernel convolution; weight (c_out, c_in, k, k).
template <class T>
struct Conv2dLayer {
  BasicParameter<T>* weight = nullptr;
  BasicParameter<T>* bias = nullptr;  // null when followed by batch norm
  int stride = 1;
  int padding = 0;

  static Conv2dLayer make(BasicParameterSet<T>& params, Rng& rng, const std::string& name,
                          int c_in, int c_out, int kernel, int stride, int padding, bool with_bias);
  BasicVar<T> operator()(const BasicVar<T>& x) const;
};

/// Transposed convolution; weight (c_in, c_out, k, k).
template <class T>
struct ConvTranspose2dLayer {
  BasicParameter<T>* weight = nullptr;
  BasicParameter<T>* bias = nullptr;
  int stride = 1;
  int padding = 0;

  static ConvTranspose2dLayer make(BasicParameterSet<T>& params, Rng& rng,
                                   const std::string& name, int c_in, int c_out, int kernel,
                                   int stride, int padding, bool with_bias);
  BasicVar<T> operator()(const BasicVar<T>& x) const;
};

template <class T>
struct BatchNormLayer {
  BasicParameter<T>* gamma = nullptr;
  BasicParameter<T>* beta = nullptr;
  BasicTensor<T>* running_mean = nullptr;
  BasicTensor<T>* running_var = nullptr;

  static BatchNormLayer make(BasicParameterSet<T>& params, const std::string& name, int channels);
  BasicVar<T> operator()(const BasicVar<T>& x, Mode mode) const;
};

/// conv -> batch norm -> activation.
template <class T>
struct ConvBlock {
  Conv2dLayer<T> conv;
  BatchNormLayer<T> norm;
  Activation act;

  static ConvBlock make(BasicParameterSet<T>& params, Rng& rng, const std::string& name, int c_in,
                        int c_out, Activation act);
  BasicVar<T> operator()(const BasicVar<T>& x, Mode mode) const;
};

}  // namespace zseg
