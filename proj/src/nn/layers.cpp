#include "zseg/layers.hpp"

#include <cmath>

#include "zseg/errors.hpp"

namespace zseg {

namespace {

// Kaiming-uniform with ReLU gain: U(-b, b), b = sqrt(6 / fan_in).
template <class T>
BasicTensor<T> kaiming_uniform(Shape shape, int fan_in, Rng& rng) {
  BasicTensor<T> t(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace

template <class T>
BasicParameter<T>& BasicParameterSet<T>::add(const std::string& name, BasicTensor<T> init) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name " + name);
  params_.push_back(std::make_unique<BasicParameter<T>>(name, std::move(init)));
  return *params_.back();
}

template <class T>
BasicTensor<T>& BasicParameterSet<T>::add_buffer(const std::string& name, BasicTensor<T> init) {
  if (find_buffer(name) != nullptr) throw ConfigError("duplicate buffer name " + name);
  buffers_.push_back(std::make_unique<BasicBuffer<T>>(BasicBuffer<T>{name, std::move(init)}));
  return buffers_.back()->value;
}

template <class T>
BasicParameter<T>* BasicParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <class T>
BasicBuffer<T>* BasicParameterSet<T>::find_buffer(const std::string& name) {
  for (auto& b : buffers_) {
    if (b->name == name) return b.get();
  }
  return nullptr;
}

template <class T>
std::size_t BasicParameterSet<T>::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p->value.value().numel();
  return total;
}

template <class T>
void BasicParameterSet<T>::zero_grad() {
  for (auto& p : params_) p->value.zero_grad();
}

template <class T>
Conv2dLayer<T> Conv2dLayer<T>::make(BasicParameterSet<T>& params, Rng& rng,
                                    const std::string& name, int c_in, int c_out, int kernel,
                                    int stride, int padding, bool with_bias) {
  Conv2dLayer layer;
  layer.weight = &params.add(name + ".weight",
                             kaiming_uniform<T>({c_out, c_in, kernel, kernel},
                                                c_in * kernel * kernel, rng));
  if (with_bias) layer.bias = &params.add(name + ".bias", BasicTensor<T>({1, c_out, 1, 1}));
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

template <class T>
BasicVar<T> Conv2dLayer<T>::operator()(const BasicVar<T>& x) const {
  return conv2d(x, weight->value, bias ? bias->value : BasicVar<T>(), stride, padding);
}

template <class T>
ConvTranspose2dLayer<T> ConvTranspose2dLayer<T>::make(BasicParameterSet<T>& params, Rng& rng,
                                                      const std::string& name, int c_in, int c_out,
                                                      int kernel, int stride, int padding,
                                                      bool with_bias) {
  ConvTranspose2dLayer layer;
  layer.weight = &params.add(name + ".weight",
                             kaiming_uniform<T>({c_in, c_out, kernel, kernel},
                                                c_out * kernel * kernel, rng));
  if (with_bias) layer.bias = &params.add(name + ".bias", BasicTensor<T>({1, c_out, 1, 1}));
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

template <class T>
BasicVar<T> ConvTranspose2dLayer<T>::operator()(const BasicVar<T>& x) const {
  return conv_transpose2d(x, weight->value, bias ? bias->value : BasicVar<T>(), stride, padding);
}

template <class T>
BatchNormLayer<T> BatchNormLayer<T>::make(BasicParameterSet<T>& params, const std::string& name,
                                          int channels) {
  BatchNormLayer layer;
  layer.gamma = &params.add(name + ".gamma", BasicTensor<T>({1, channels, 1, 1}, T(1)));
  layer.beta = &params.add(name + ".beta", BasicTensor<T>({1, channels, 1, 1}));
  layer.running_mean = &params.add_buffer(name + ".running_mean", BasicTensor<T>({1, channels, 1, 1}));
  layer.running_var =
      &params.add_buffer(name + ".running_var", BasicTensor<T>({1, channels, 1, 1}, T(1)));
  return layer;
}

template <class T>
BasicVar<T> BatchNormLayer<T>::operator()(const BasicVar<T>& x, Mode mode) const {
  return batch_norm(x, gamma->value, beta->value, *running_mean, *running_var, mode);
}

template <class T>
ConvBlock<T> ConvBlock<T>::make(BasicParameterSet<T>& params, Rng& rng, const std::string& name,
                                int c_in, int c_out, Activation act) {
  ConvBlock block;
  block.conv = Conv2dLayer<T>::make(params, rng, name + ".conv", c_in, c_out, 3, 1, 1, false);
  block.norm = BatchNormLayer<T>::make(params, name + ".bn", c_out);
  block.act = act;
  return block;
}

template <class T>
BasicVar<T> ConvBlock<T>::operator()(const BasicVar<T>& x, Mode mode) const {
  return activation(norm(conv(x), mode), act);
}

template class BasicParameterSet<float>;
template class BasicParameterSet<double>;
template struct Conv2dLayer<float>;
template struct Conv2dLayer<double>;
template struct ConvTranspose2dLayer<float>;
template struct ConvTranspose2dLayer<double>;
template struct BatchNormLayer<float>;
template struct BatchNormLayer<double>;
template struct ConvBlock<float>;
template struct ConvBlock<double>;

}  // namespace zseg
