#include "zseg/ops.hpp"

#include <cmath>
#include <utility>

#include "gemm.hpp"
#include "zseg/errors.hpp"
#include "zseg/rng.hpp"

namespace zseg {

namespace {
thread_local BranchTape* active_tape = nullptr;
}

void BranchTape::install(Mode mode) {
  if (installed_) throw InvariantError("branch tape installed twice");
  if (mode == Mode::record) decisions_.clear();
  mode_ = mode;
  cursor_ = 0;
  diverged_ = false;
  previous_ = active_tape;
  active_tape = this;
  installed_ = true;
}

void BranchTape::uninstall() {
  if (!installed_) return;
  if (mode_ == Mode::replay && cursor_ != decisions_.size()) {
    active_tape = previous_;
    installed_ = false;
    throw InvariantError("branch tape replay consumed " + std::to_string(cursor_) + " of " +
                         std::to_string(decisions_.size()) + " recorded calls");
  }
  active_tape = previous_;
  installed_ = false;
}

BranchTape::~BranchTape() {
  if (installed_) active_tape = previous_;
}

BranchTape* BranchTape::current() { return active_tape; }

const std::vector<std::uint8_t>& BranchTape::decide(std::vector<std::uint8_t> free) {
  if (mode_ == Mode::record) {
    decisions_.push_back(std::move(free));
    return decisions_.back();
  }
  if (cursor_ >= decisions_.size() || decisions_[cursor_].size() != free.size()) {
    throw InvariantError("branch tape replay does not match the recorded graph");
  }
  const auto& stored = decisions_[cursor_++];
  if (stored != free) diverged_ = true;
  return stored;
}

namespace {

using detail::PatchGeometry;

template <class T>
void check_bias(const BasicVar<T>& bias, int channels, const char* op) {
  if (!bias.defined()) return;
  if (bias.value().numel() != static_cast<std::size_t>(channels)) {
    throw ShapeError(std::string(op) + ": bias length " + std::to_string(bias.value().numel()) +
                     " != output channels " + std::to_string(channels));
  }
}

template <class T>
void add_bias(BasicTensor<T>& out, const BasicVar<T>& bias) {
  if (!bias.defined()) return;
  const Shape& s = out.shape();
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T b = bias.value()[c];
      T* p = out.ptr() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
}

template <class T>
void accumulate_bias_grad(BasicNode<T>& bias, const BasicTensor<T>& grad_out) {
  if (!bias.requires_grad) return;
  BasicTensor<T>& gb = bias.grad_buffer();
  const Shape& s = grad_out.shape();
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* p = grad_out.ptr() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      gb[c] += static_cast<T>(acc);
    }
  }
}

template <class T>
std::vector<BasicVar<T>> with_optional(std::vector<BasicVar<T>> vars, const BasicVar<T>& maybe) {
  if (maybe.defined()) vars.push_back(maybe);
  return vars;
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

template <class T>
BasicVar<T> conv2d(const BasicVar<T>& input, const BasicVar<T>& weight, const BasicVar<T>& bias,
                   int stride, int padding) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  if (xs.c != ws.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                     std::to_string(ws.c));
  }
  check_bias(bias, ws.n, "conv2d");
  const int k = ws.h;
  const int span_h = xs.h + 2 * padding - k;
  const int span_w = xs.w + 2 * padding - k;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than padded input " +
                     xs.str());
  }
  const PatchGeometry g{xs.c, xs.h, xs.w, k, stride, padding, span_h / stride + 1,
                        span_w / stride + 1};
  const int c_out = ws.n;
  BasicTensor<T> out(Shape{xs.n, c_out, g.out_h, g.out_w});
  std::vector<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  const std::size_t out_stride = static_cast<std::size_t>(c_out) * g.cols();
  for (int n = 0; n < xs.n; ++n) {
    detail::im2col(g, input.value().ptr() + n * in_stride, cols.data());
    detail::gemm_acc(c_out, g.cols(), g.rows(), weight.value().ptr(), cols.data(),
                     out.ptr() + n * out_stride);
  }
  add_bias(out, bias);
  require_finite(out, "conv2d");

  return BasicVar<T>::make_result(
      std::move(out), with_optional<T>({input, weight}, bias), [g, c_out](BasicNode<T>& self) {
        BasicNode<T>& x = *self.parents[0];
        BasicNode<T>& w = *self.parents[1];
        const BasicTensor<T>& gy = self.grad;
        const int batch = x.value.shape().n;
        const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
        const std::size_t out_stride = static_cast<std::size_t>(c_out) * g.cols();
        std::vector<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
        std::vector<T> scratch;
        std::vector<T> w_t;
        if (x.requires_grad) {
          w_t.resize(w.value.numel());
          detail::transpose(c_out, g.rows(), w.value.ptr(), w_t.data());
        }
        for (int n = 0; n < batch; ++n) {
          const T* gy_n = gy.ptr() + n * out_stride;
          if (w.requires_grad) {
            scratch.resize(cols.size());
            detail::im2col(g, x.value.ptr() + n * in_stride, cols.data());
            detail::transpose(g.rows(), g.cols(), cols.data(), scratch.data());
            detail::gemm_acc(c_out, g.rows(), g.cols(), gy_n, scratch.data(),
                             w.grad_buffer().ptr());
          }
          if (x.requires_grad) {
            std::fill(cols.begin(), cols.end(), T(0));
            detail::gemm_acc(g.rows(), g.cols(), c_out, w_t.data(), gy_n, cols.data());
            detail::col2im_acc(g, cols.data(), x.grad_buffer().ptr() + n * in_stride);
          }
        }
        if (self.parents.size() > 2) accumulate_bias_grad(*self.parents[2], gy);
      });
}

template <class T>
BasicVar<T> conv_transpose2d(const BasicVar<T>& input, const BasicVar<T>& weight,
                             const BasicVar<T>& bias, int stride, int padding) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (ws.h != ws.w) throw ShapeError("conv_transpose2d: kernel must be square, got " + ws.str());
  if (stride < 1 || padding < 0) {
    throw ShapeError("conv_transpose2d: stride must be >= 1 and padding >= 0");
  }
  if (xs.c != ws.n) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(xs.c) +
                     " channels, weight expects " + std::to_string(ws.n));
  }
  const int c_in = xs.c;
  const int c_out = ws.c;
  check_bias(bias, c_out, "conv_transpose2d");
  const int k = ws.h;
  const int out_h = (xs.h - 1) * stride - 2 * padding + k;
  const int out_w = (xs.w - 1) * stride - 2 * padding + k;
  if (out_h <= 0 || out_w <= 0) throw ShapeError("conv_transpose2d: empty output for " + xs.str());
  // Geometry of the forward convolution this operator is the adjoint of.
  const PatchGeometry g{c_out, out_h, out_w, k, stride, padding, xs.h, xs.w};
  BasicTensor<T> out(Shape{xs.n, c_out, out_h, out_w});
  std::vector<T> w_t(weight.value().numel());
  detail::transpose(c_in, g.rows(), weight.value().ptr(), w_t.data());
  std::vector<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  const std::size_t in_stride = static_cast<std::size_t>(c_in) * g.cols();
  const std::size_t out_stride = static_cast<std::size_t>(c_out) * out_h * out_w;
  for (int n = 0; n < xs.n; ++n) {
    std::fill(cols.begin(), cols.end(), T(0));
    detail::gemm_acc(g.rows(), g.cols(), c_in, w_t.data(), input.value().ptr() + n * in_stride,
                     cols.data());
    detail::col2im_acc(g, cols.data(), out.ptr() + n * out_stride);
  }
  add_bias(out, bias);
  require_finite(out, "conv_transpose2d");

  return BasicVar<T>::make_result(
      std::move(out), with_optional<T>({input, weight}, bias), [g, c_in](BasicNode<T>& self) {
        BasicNode<T>& x = *self.parents[0];
        BasicNode<T>& w = *self.parents[1];
        const BasicTensor<T>& gy = self.grad;
        const int batch = x.value.shape().n;
        const std::size_t in_stride = static_cast<std::size_t>(c_in) * g.cols();
        const std::size_t out_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
        std::vector<T> cols(static_cast<std::size_t>(g.rows()) * g.cols());
        std::vector<T> cols_t;
        for (int n = 0; n < batch; ++n) {
          detail::im2col(g, gy.ptr() + n * out_stride, cols.data());
          if (x.requires_grad) {
            detail::gemm_acc(c_in, g.cols(), g.rows(), w.value.ptr(), cols.data(),
                             x.grad_buffer().ptr() + n * in_stride);
          }
          if (w.requires_grad) {
            cols_t.resize(cols.size());
            detail::transpose(g.rows(), g.cols(), cols.data(), cols_t.data());
            detail::gemm_acc(c_in, g.rows(), g.cols(), x.value.ptr() + n * in_stride,
                             cols_t.data(), w.grad_buffer().ptr());
          }
        }
        if (self.parents.size() > 2) accumulate_bias_grad(*self.parents[2], gy);
      });
}

// ---------------------------------------------------------------------------
// Pooling

std::size_t PoolIndices::source_offset(std::size_t pooled_offset) const {
  const std::size_t pw = static_cast<std::size_t>(pooled.w);
  const std::size_t ph = static_cast<std::size_t>(pooled.h);
  const std::size_t x = pooled_offset % pw;
  const std::size_t y = (pooled_offset / pw) % ph;
  const std::size_t plane_index = pooled_offset / (pw * ph);
  const std::size_t local = window_index[pooled_offset];
  const std::size_t sy = 2 * y + local / 2;
  const std::size_t sx = 2 * x + local % 2;
  return plane_index * (4 * ph * pw) + sy * (2 * pw) + sx;
}

template <class T>
BasicPoolResult<T> max_pool_2x2(const BasicVar<T>& input) {
  const Shape& s = input.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("max_pool_2x2: spatial dims must be even, got " + s.str());
  }
  auto indices = std::make_shared<PoolIndices>();
  indices->pooled = Shape{s.n, s.c, s.h / 2, s.w / 2};
  BasicTensor<T> out(indices->pooled);
  indices->window_index.resize(out.numel());
  const T* x = input.value().ptr();
  const int ph = s.h / 2;
  const int pw = s.w / 2;
  std::size_t o = 0;
  for (int plane = 0; plane < s.n * s.c; ++plane) {
    const T* xp = x + static_cast<std::size_t>(plane) * s.h * s.w;
    for (int y = 0; y < ph; ++y) {
      const T* r0 = xp + static_cast<std::size_t>(2 * y) * s.w;
      const T* r1 = r0 + s.w;
      for (int xx = 0; xx < pw; ++xx, ++o) {
        const T cand[4] = {r0[2 * xx], r0[2 * xx + 1], r1[2 * xx], r1[2 * xx + 1]};
        std::uint8_t best = 0;
        // Strict comparison: the first cell in row-major order wins ties.
        for (std::uint8_t i = 1; i < 4; ++i) {
          if (cand[i] > cand[best]) best = i;
        }
        out[o] = cand[best];
        indices->window_index[o] = best;
      }
    }
  }
  if (BranchTape* tape = BranchTape::current()) {
    const auto& chosen = tape->decide(indices->window_index);
    if (tape->mode() == BranchTape::Mode::replay) {
      indices->window_index = chosen;
      for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[indices->source_offset(i)];
    }
  }
  std::shared_ptr<const PoolIndices> shared = indices;
  BasicVar<T> result =
      BasicVar<T>::make_result(std::move(out), {input}, [shared](BasicNode<T>& self) {
        BasicTensor<T>& gx = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
          gx[shared->source_offset(i)] += self.grad[i];
        }
      });
  return {std::move(result), std::move(shared)};
}

template <class T>
BasicVar<T> max_unpool_2x2(const BasicVar<T>& input, std::shared_ptr<const PoolIndices> indices) {
  if (!indices) throw ShapeError("max_unpool_2x2: missing pool indices");
  const Shape& s = input.shape();
  if (!(s == indices->pooled)) {
    throw ShapeError("max_unpool_2x2: input " + s.str() + " does not match pooled shape " +
                     indices->pooled.str());
  }
  BasicTensor<T> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  for (std::size_t i = 0; i < input.value().numel(); ++i) {
    out[indices->source_offset(i)] = input.value()[i];
  }
  return BasicVar<T>::make_result(std::move(out), {input}, [indices](BasicNode<T>& self) {
    BasicTensor<T>& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[indices->source_offset(i)];
  });
}

// ---------------------------------------------------------------------------
// Structural

template <class T>
BasicVar<T> concat_channels(const BasicVar<T>& a, const BasicVar<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: mismatched tensors " + sa.str() + " and " + sb.str());
  }
  BasicTensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t block_a = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t block_b = static_cast<std::size_t>(sb.c) * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    T* dst = out.ptr() + n * (block_a + block_b);
    std::copy_n(a.value().ptr() + n * block_a, block_a, dst);
    std::copy_n(b.value().ptr() + n * block_b, block_b, dst + block_a);
  }
  return BasicVar<T>::make_result(
      std::move(out), {a, b}, [block_a, block_b](BasicNode<T>& self) {
        BasicNode<T>& pa = *self.parents[0];
        BasicNode<T>& pb = *self.parents[1];
        const int batch = self.value.shape().n;
        for (int n = 0; n < batch; ++n) {
          const T* src = self.grad.ptr() + n * (block_a + block_b);
          if (pa.requires_grad && block_a > 0) {
            T* ga = pa.grad_buffer().ptr() + n * block_a;
            for (std::size_t i = 0; i < block_a; ++i) ga[i] += src[i];
          }
          if (pb.requires_grad && block_b > 0) {
            T* gb = pb.grad_buffer().ptr() + n * block_b;
            for (std::size_t i = 0; i < block_b; ++i) gb[i] += src[block_a + i];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Activations

template <class T>
BasicVar<T> activation(const BasicVar<T>& input, Activation act) {
  const BasicTensor<T>& x = input.value();
  BasicTensor<T> out(x.shape());
  const std::size_t count = x.numel();
  const T alpha = static_cast<T>(act.alpha);
  BranchTape* tape = BranchTape::current();
  const bool piecewise =
      act.kind == ActivationKind::relu || act.kind == ActivationKind::leaky_relu;
  if (piecewise && tape != nullptr) {
    std::vector<std::uint8_t> positive(count);
    for (std::size_t i = 0; i < count; ++i) positive[i] = x[i] > T(0);
    const auto& branch = tape->decide(std::move(positive));
    const T negative_slope = act.kind == ActivationKind::relu ? T(0) : alpha;
    for (std::size_t i = 0; i < count; ++i) out[i] = branch[i] ? x[i] : negative_slope * x[i];
    return BasicVar<T>::make_result(std::move(out), {input}, [branch, negative_slope](BasicNode<T>& self) {
      BasicTensor<T>& gx = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.numel(); ++i) {
        gx[i] += branch[i] ? self.grad[i] : negative_slope * self.grad[i];
      }
    });
  }
  switch (act.kind) {
    case ActivationKind::relu:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case ActivationKind::leaky_relu:
      for (std::size_t i = 0; i < count; ++i) out[i] = x[i] > T(0) ? x[i] : alpha * x[i];
      break;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < count; ++i) out[i] = sigmoid_scalar(x[i]);
      break;
    case ActivationKind::tanh:
      for (std::size_t i = 0; i < count; ++i) out[i] = std::tanh(x[i]);
      break;
  }
  return BasicVar<T>::make_result(std::move(out), {input}, [act, alpha](BasicNode<T>& self) {
    BasicNode<T>& in = *self.parents[0];
    BasicTensor<T>& gx = in.grad_buffer();
    const BasicTensor<T>& gy = self.grad;
    const BasicTensor<T>& xv = in.value;
    const BasicTensor<T>& yv = self.value;
    const std::size_t count = gy.numel();
    switch (act.kind) {
      case ActivationKind::relu:
        for (std::size_t i = 0; i < count; ++i) gx[i] += xv[i] > T(0) ? gy[i] : T(0);
        break;
      case ActivationKind::leaky_relu:
        for (std::size_t i = 0; i < count; ++i) gx[i] += xv[i] > T(0) ? gy[i] : alpha * gy[i];
        break;
      case ActivationKind::sigmoid:
        for (std::size_t i = 0; i < count; ++i) gx[i] += gy[i] * yv[i] * (T(1) - yv[i]);
        break;
      case ActivationKind::tanh:
        for (std::size_t i = 0; i < count; ++i) gx[i] += gy[i] * (T(1) - yv[i] * yv[i]);
        break;
    }
  });
}

// ---------------------------------------------------------------------------
// Batch normalization

namespace {

template <class T>
struct NormCache {
  std::vector<T> normalized;  // x-hat, same layout as the input
  std::vector<T> inv_std;     // per channel
};

}  // namespace

template <class T>
BasicVar<T> batch_norm(const BasicVar<T>& input, const BasicVar<T>& gamma,
                       const BasicVar<T>& beta, BasicTensor<T>& running_mean,
                       BasicTensor<T>& running_var, Mode mode) {
  const Shape& s = input.shape();
  const std::size_t channels = static_cast<std::size_t>(s.c);
  if (gamma.value().numel() != channels || beta.value().numel() != channels ||
      running_mean.numel() != channels || running_var.numel() != channels) {
    throw ShapeError("batch_norm: parameter length does not match " + std::to_string(s.c) +
                     " channels");
  }
  const std::size_t plane = s.plane();
  const std::size_t per_channel = static_cast<std::size_t>(s.n) * plane;
  auto cache = std::make_shared<NormCache<T>>();
  cache->normalized.resize(input.value().numel());
  cache->inv_std.resize(channels);
  BasicTensor<T> out(s);
  const T* x = input.value().ptr();

  for (int c = 0; c < s.c; ++c) {
    double mean;
    double var;
    if (mode == Mode::train) {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = x + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      mean = acc / static_cast<double>(per_channel);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = x + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(per_channel);
      const double unbiased = per_channel > 1 ? sq / static_cast<double>(per_channel - 1) : var;
      running_mean[c] = static_cast<T>((1.0 - kBatchNormMomentum) * running_mean[c] +
                                       kBatchNormMomentum * mean);
      running_var[c] = static_cast<T>((1.0 - kBatchNormMomentum) * running_var[c] +
                                      kBatchNormMomentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + kBatchNormEpsilon));
    cache->inv_std[c] = inv_std;
    const T g = gamma.value()[c];
    const T b = beta.value()[c];
    const T m = static_cast<T>(mean);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = (x[base + i] - m) * inv_std;
        cache->normalized[base + i] = xh;
        out[base + i] = g * xh + b;
      }
    }
  }
  require_finite(out, "batch_norm");

  return BasicVar<T>::make_result(
      std::move(out), {input, gamma, beta},
      [cache, mode, plane, per_channel](BasicNode<T>& self) {
        BasicNode<T>& in = *self.parents[0];
        BasicNode<T>& gm = *self.parents[1];
        BasicNode<T>& bt = *self.parents[2];
        const Shape& s = self.value.shape();
        const BasicTensor<T>& gy = self.grad;
        for (int c = 0; c < s.c; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xh = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += gy[base + i];
              sum_dy_xh += static_cast<double>(gy[base + i]) * cache->normalized[base + i];
            }
          }
          if (gm.requires_grad) gm.grad_buffer()[c] += static_cast<T>(sum_dy_xh);
          if (bt.requires_grad) bt.grad_buffer()[c] += static_cast<T>(sum_dy);
          if (!in.requires_grad) continue;
          BasicTensor<T>& gx = in.grad_buffer();
          const T k = gm.value[c] * cache->inv_std[c];
          if (mode == Mode::train) {
            const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(per_channel));
            const T mean_dy_xh = static_cast<T>(sum_dy_xh / static_cast<double>(per_channel));
            for (int n = 0; n < s.n; ++n) {
              const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                gx[base + i] +=
                    k * (gy[base + i] - mean_dy - cache->normalized[base + i] * mean_dy_xh);
              }
            }
          } else {
            for (int n = 0; n < s.n; ++n) {
              const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) gx[base + i] += k * gy[base + i];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise and reductions

template <class T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return BasicVar<T>::make_result(std::move(out), {a, b}, [](BasicNode<T>& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      BasicTensor<T>& g = parent->grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return BasicVar<T>::make_result(std::move(out), {a, b}, [](BasicNode<T>& self) {
    BasicNode<T>& pa = *self.parents[0];
    BasicNode<T>& pb = *self.parents[1];
    if (pa.requires_grad) {
      BasicTensor<T>& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      BasicTensor<T>& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <class T>
BasicVar<T> scale(const BasicVar<T>& a, double k) {
  const T kt = static_cast<T>(k);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * kt;
  return BasicVar<T>::make_result(std::move(out), {a}, [kt](BasicNode<T>& self) {
    BasicTensor<T>& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += kt * self.grad[i];
  });
}

template <class T>
BasicVar<T> sum(const BasicVar<T>& a) {
  double acc = 0.0;
  for (T v : a.value().data()) acc += v;
  BasicTensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc));
  require_finite(out, "sum");
  return BasicVar<T>::make_result(std::move(out), {a}, [](BasicNode<T>& self) {
    BasicTensor<T>& g = self.parents[0]->grad_buffer();
    const T gy = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gy;
  });
}

template <class T>
BasicVar<T> weighted_sum(const BasicVar<T>& a, const BasicTensor<T>& weights) {
  if (!(a.shape() == weights.shape())) {
    throw ShapeError("weighted_sum: shape mismatch " + a.shape().str() + " vs " +
                     weights.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.numel(); ++i) {
    acc += static_cast<double>(a.value()[i]) * weights[i];
  }
  BasicTensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc));
  require_finite(out, "weighted_sum");
  auto w = std::make_shared<BasicTensor<T>>(weights);
  return BasicVar<T>::make_result(std::move(out), {a}, [w](BasicNode<T>& self) {
    BasicTensor<T>& g = self.parents[0]->grad_buffer();
    const T gy = self.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += gy * (*w)[i];
  });
}

template <class T>
BasicVar<T> detach(const BasicVar<T>& a) {
  return BasicVar<T>(a.value(), false);
}

#define ZSEG_INSTANTIATE_OPS(T)                                                                  \
  template BasicVar<T> conv2d(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&, int,   \
                              int);                                                              \
  template BasicVar<T> conv_transpose2d(const BasicVar<T>&, const BasicVar<T>&,                  \
                                        const BasicVar<T>&, int, int);                           \
  template BasicPoolResult<T> max_pool_2x2(const BasicVar<T>&);                                  \
  template BasicVar<T> max_unpool_2x2(const BasicVar<T>&, std::shared_ptr<const PoolIndices>);   \
  template BasicVar<T> concat_channels(const BasicVar<T>&, const BasicVar<T>&);                  \
  template BasicVar<T> activation(const BasicVar<T>&, Activation);                               \
  template BasicVar<T> batch_norm(const BasicVar<T>&, const BasicVar<T>&, const BasicVar<T>&,    \
                                  BasicTensor<T>&, BasicTensor<T>&, Mode);                       \
  template BasicVar<T> add(const BasicVar<T>&, const BasicVar<T>&);                              \
  template BasicVar<T> mul(const BasicVar<T>&, const BasicVar<T>&);                              \
  template BasicVar<T> scale(const BasicVar<T>&, double);                                        \
  template BasicVar<T> sum(const BasicVar<T>&);                                                  \
  template BasicVar<T> weighted_sum(const BasicVar<T>&, const BasicTensor<T>&);                  \
  template BasicVar<T> detach(const BasicVar<T>&);

ZSEG_INSTANTIATE_OPS(float)
ZSEG_INSTANTIATE_OPS(double)

#undef ZSEG_INSTANTIATE_OPS

}  // namespace zseg
