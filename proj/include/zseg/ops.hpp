#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "zseg/autograd.hpp"

namespace zseg {

enum class Mode { train, eval };

/// Argmax positions recorded by max_pool_2x2.
///
/// `window_index` holds 0..3 per pooled cell, row-major inside the 2x2
/// window, so every index addresses a cell of its own window.
struct PoolIndices {
  Shape pooled;
  std::vector<std::uint8_t> window_index;

  /// Flat offset of the recorded cell in the unpooled (2h x 2w) tensor.
  std::size_t source_offset(std::size_t pooled_offset) const;
};

template <class T>
struct BasicPoolResult {
  BasicVar<T> output;
  std::shared_ptr<const PoolIndices> indices;
};
using PoolResult = BasicPoolResult<float>;

enum class ActivationKind { relu, leaky_relu, sigmoid, tanh };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  float alpha = 0.0f;  // leaky_relu slope

  static Activation relu() { return {ActivationKind::relu, 0.0f}; }
  static Activation leaky_relu(float alpha) { return {ActivationKind::leaky_relu, alpha}; }
  static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0f}; }
  static Activation tanh() { return {ActivationKind::tanh, 0.0f}; }
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// weight: (c_out, c_in, k, k); bias: c_out elements or undefined.
template <class T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias,
                   int stride, int padding);

// weight: (c_in, c_out, k, k). Output extent (h - 1) * stride - 2 * padding + k.
template <class T>
BasicVar<T> conv_transpose2d(const BasicVar<T>& input, const BasicVar<T>& weight,
                             const BasicVar<T>& bias, int stride, int padding);

template <class T>
BasicPoolResult<T> max_pool_2x2(const BasicVar<T>& input);

template <class T>
BasicVar<T> max_unpool_2x2(const BasicVar<T>& input, std::shared_ptr<const PoolIndices> indices);

template <class T>
BasicVar<T> concat_channels(const BasicVar<T>& a, const BasicVar<T>& b);

template <class T>
BasicVar<T> activation(const BasicVar<T>& input, Activation kind);

/// Per-channel batch normalization; gamma/beta hold c elements.
/// Train mode normalizes with batch statistics (biased variance) and moves
/// the running buffers (unbiased variance); eval mode uses the buffers.
template <class T>
BasicVar<T> batch_norm(const BasicVar<T>& input, const BasicVar<T>& gamma,
                       const BasicVar<T>& beta, BasicTensor<T>& running_mean,
                       BasicTensor<T>& running_var, Mode mode);

template <class T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b);
template <class T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b);
template <class T>
BasicVar<T> scale(const BasicVar<T>& a, double k);
/// Scalar sum of all elements.
template <class T>
BasicVar<T> sum(const BasicVar<T>& a);
/// Scalar sum of a * weights for a constant weight tensor.
template <class T>
BasicVar<T> weighted_sum(const BasicVar<T>& a, const BasicTensor<T>& weights);
/// Same value, cut from the graph.
template <class T>
BasicVar<T> detach(const BasicVar<T>& a);

/// Branch decisions taken at non-smooth points: ReLU/leaky-ReLU input signs
/// and max-pool winners, one entry per operator call in execution order.
///
/// A tape installed in record mode captures them; in replay mode the same
/// operators reuse the recorded decisions instead of recomputing them, so a
/// perturbed forward pass stays on the piece of the piecewise-smooth function
/// that was active when recording. `diverged()` tells whether the free
/// decisions would have differed.
class BranchTape {
public:
  enum class Mode { record, replay };

  /// Installs this tape for the current thread until `uninstall` or destruction.
  void install(Mode mode);
  void uninstall();
  ~BranchTape();

  bool diverged() const { return diverged_; }
  std::size_t size() const { return decisions_.size(); }

  static BranchTape* current();
  Mode mode() const { return mode_; }
  /// Record: stores `free`. Replay: returns the stored decisions for this
  /// call and notes whether they differ from `free`.
  const std::vector<std::uint8_t>& decide(std::vector<std::uint8_t> free);

private:
  std::vector<std::vector<std::uint8_t>> decisions_;
  std::size_t cursor_ = 0;
  Mode mode_ = Mode::record;
  bool installed_ = false;
  bool diverged_ = false;
  BranchTape* previous_ = nullptr;
};

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace zseg
