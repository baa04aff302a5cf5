#pragma once

#include "zseg/models.hpp"

namespace zseg {

inline constexpr double kDiceEpsilon = 1e-7;

/// Continuous Dice loss over the whole batch:
///   -2 * sum(s * r) / (sum(s) + sum(r) + eps),  s = sigmoid(logits).
/// Both-empty gives 0. Sums are accumulated in double.
/// Throws ShapeError on shape mismatch, DataError for non-binary targets.
template <class T>
BasicVar<T> dsc_loss(const BasicVar<T>& logits, const BasicTensor<T>& target);

/// Same formula with s supplied directly (values in [0, 1]).
template <class T>
BasicVar<T> dsc_loss_from_probabilities(const BasicVar<T>& s, const BasicTensor<T>& target);

/// Mean binary cross-entropy between sigmoid(logits) and a constant label,
/// computed in the overflow-safe form max(x,0) - x*t + log(1 + exp(-|x|)).
template <class T>
BasicVar<T> bce_with_logits(const BasicVar<T>& logits, double label);

template <class T>
struct BasicAdversarialLoss {
  BasicVar<T> total;
  double dsc = 0.0;          // dice component before weighting (generator only)
  double adversarial = 0.0;  // BCE part
};

/// BCE(D(image, target), 1) + BCE(D(image, fake), 0); `fake` is detached
/// so only the discriminator receives gradients.
template <class T>
BasicAdversarialLoss<T> discriminator_loss(BasicModel<T>& disc, const BasicVar<T>& image,
                                           const BasicTensor<T>& target,
                                           const BasicVar<T>& fake_probabilities, Mode mode);

/// BCE(D(image, sigmoid(fake_logits)), 1) + lambda_seg * dsc_loss(fake_logits, target).
template <class T>
BasicAdversarialLoss<T> generator_loss(BasicModel<T>& disc, const BasicVar<T>& image,
                                       const BasicTensor<T>& target, const BasicVar<T>& fake_logits,
                                       double lambda_seg, Mode mode);

template <class T>
struct BasicPix2PixLosses {
  BasicAdversarialLoss<T> generator;
  BasicAdversarialLoss<T> discriminator;
};

inline constexpr double kDefaultLambdaSeg = 10.0;

/// Both pix2pix objectives from one generator pass.
template <class T>
BasicPix2PixLosses<T> pix2pix_losses(BasicModel<T>& gen, BasicModel<T>& disc,
                                     const BasicVar<T>& image, const BasicTensor<T>& target,
                                     double lambda_seg = kDefaultLambdaSeg, Mode mode = Mode::train);

}  // namespace zseg
