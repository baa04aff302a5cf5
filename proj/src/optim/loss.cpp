#include "zseg/loss.hpp"

#include <cmath>

#include "zseg/errors.hpp"

namespace zseg {

namespace {

template <class T>
void check_target(const Shape& prediction, const BasicTensor<T>& target, const char* op) {
  if (!(prediction == target.shape())) {
    throw ShapeError(std::string(op) + ": prediction " + prediction.str() + " vs target " +
                     target.shape().str());
  }
  for (std::size_t i = 0; i < target.numel(); ++i) {
    if (target[i] != T(0) && target[i] != T(1)) {
      throw DataError(std::string(op) + ": target values must be 0 or 1");
    }
  }
}

struct DiceSums {
  double overlap = 0.0;  // sum s*r
  double denom = 0.0;    // sum s + sum r + eps
};

template <class T>
DiceSums dice_sums(const BasicTensor<T>& s, const BasicTensor<T>& r) {
  DiceSums d;
  double sum_s = 0.0;
  double sum_r = 0.0;
  for (std::size_t i = 0; i < s.numel(); ++i) {
    d.overlap += static_cast<double>(s[i]) * r[i];
    sum_s += s[i];
    sum_r += r[i];
  }
  d.denom = sum_s + sum_r + kDiceEpsilon;
  return d;
}

// dL/ds_i = -2 r_i / D + 2 O / D^2
template <class T>
BasicVar<T> dice_from(const BasicVar<T>& input, BasicTensor<T> s, const BasicTensor<T>& target,
                      bool through_sigmoid) {
  const DiceSums d = dice_sums(s, target);
  const double value = d.overlap == 0.0 ? 0.0 : -2.0 * d.overlap / d.denom;
  BasicTensor<T> out({1, 1, 1, 1}, static_cast<T>(value));
  return BasicVar<T>::make_result(
      std::move(out), {input},
      [d, s = std::move(s), target, through_sigmoid](BasicNode<T>& self) {
        BasicTensor<T>& gx = self.parents[0]->grad_buffer();
        const double upstream = self.grad[0];
        const double a = -2.0 / d.denom;
        const double b = 2.0 * d.overlap / (d.denom * d.denom);
        for (std::size_t i = 0; i < gx.numel(); ++i) {
          double g = a * target[i] + b;
          if (through_sigmoid) g *= static_cast<double>(s[i]) * (1.0 - s[i]);
          gx[i] += static_cast<T>(upstream * g);
        }
      });
}

}  // namespace

template <class T>
BasicVar<T> dsc_loss(const BasicVar<T>& logits, const BasicTensor<T>& target) {
  check_target(logits.shape(), target, "dsc_loss");
  BasicTensor<T> s(logits.shape());
  for (std::size_t i = 0; i < s.numel(); ++i) s[i] = sigmoid_scalar(logits.value()[i]);
  return dice_from(logits, std::move(s), target, true);
}

template <class T>
BasicVar<T> dsc_loss_from_probabilities(const BasicVar<T>& s, const BasicTensor<T>& target) {
  check_target(s.shape(), target, "dsc_loss");
  return dice_from(s, s.value(), target, false);
}

template <class T>
BasicVar<T> bce_with_logits(const BasicVar<T>& logits, double label) {
  const BasicTensor<T>& x = logits.value();
  if (x.numel() == 0) throw ShapeError("bce_with_logits: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    acc += std::max(v, 0.0) - v * label + std::log1p(std::exp(-std::abs(v)));
  }
  const double n = static_cast<double>(x.numel());
  BasicTensor<T> out({1, 1, 1, 1}, static_cast<T>(acc / n));
  return BasicVar<T>::make_result(std::move(out), {logits}, [label, n](BasicNode<T>& self) {
    BasicNode<T>& in = *self.parents[0];
    BasicTensor<T>& gx = in.grad_buffer();
    const double upstream = self.grad[0] / n;
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      gx[i] += static_cast<T>(upstream * (sigmoid_scalar<double>(in.value[i]) - label));
    }
  });
}

template <class T>
BasicAdversarialLoss<T> discriminator_loss(BasicModel<T>& disc, const BasicVar<T>& image,
                                           const BasicTensor<T>& target,
                                           const BasicVar<T>& fake_probabilities, Mode mode) {
  check_target(image.shape(), target, "discriminator_loss");
  const BasicVar<T> real = disc.forward(concat_channels(image, BasicVar<T>(target)), mode);
  const BasicVar<T> fake =
      disc.forward(concat_channels(image, detach(fake_probabilities)), mode);
  BasicAdversarialLoss<T> loss;
  loss.total = add(bce_with_logits(real, 1.0), bce_with_logits(fake, 0.0));
  loss.adversarial = loss.total.value()[0];
  return loss;
}

template <class T>
BasicAdversarialLoss<T> generator_loss(BasicModel<T>& disc, const BasicVar<T>& image,
                                       const BasicTensor<T>& target, const BasicVar<T>& fake_logits,
                                       double lambda_seg, Mode mode) {
  const BasicVar<T> dice = dsc_loss(fake_logits, target);
  const BasicVar<T> fake = activation(fake_logits, Activation::sigmoid());
  const BasicVar<T> adversarial =
      bce_with_logits(disc.forward(concat_channels(image, fake), mode), 1.0);
  BasicAdversarialLoss<T> loss;
  loss.total = add(adversarial, scale(dice, lambda_seg));
  loss.dsc = dice.value()[0];
  loss.adversarial = adversarial.value()[0];
  return loss;
}

template <class T>
BasicPix2PixLosses<T> pix2pix_losses(BasicModel<T>& gen, BasicModel<T>& disc,
                                     const BasicVar<T>& image, const BasicTensor<T>& target,
                                     double lambda_seg, Mode mode) {
  const BasicVar<T> logits = gen.forward(image, mode);
  BasicPix2PixLosses<T> out;
  out.generator = generator_loss(disc, image, target, logits, lambda_seg, mode);
  out.discriminator = discriminator_loss(
      disc, image, target, activation(logits, Activation::sigmoid()), mode);
  return out;
}

#define ZSEG_INSTANTIATE_LOSS(T)                                                                  \
  template BasicVar<T> dsc_loss<T>(const BasicVar<T>&, const BasicTensor<T>&);                    \
  template BasicVar<T> dsc_loss_from_probabilities<T>(const BasicVar<T>&, const BasicTensor<T>&); \
  template BasicVar<T> bce_with_logits<T>(const BasicVar<T>&, double);                            \
  template BasicAdversarialLoss<T> discriminator_loss<T>(                                         \
      BasicModel<T>&, const BasicVar<T>&, const BasicTensor<T>&, const BasicVar<T>&, Mode);       \
  template BasicAdversarialLoss<T> generator_loss<T>(                                             \
      BasicModel<T>&, const BasicVar<T>&, const BasicTensor<T>&, const BasicVar<T>&, double, Mode); \
  template BasicPix2PixLosses<T> pix2pix_losses<T>(BasicModel<T>&, BasicModel<T>&,                \
                                                   const BasicVar<T>&, const BasicTensor<T>&,     \
                                                   double, Mode);

ZSEG_INSTANTIATE_LOSS(float)
ZSEG_INSTANTIATE_LOSS(double)

#undef ZSEG_INSTANTIATE_LOSS

}  // namespace zseg
