#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace zseg::detail {

// C[m x n] += A[m x k] * B[k x n], all row-major and dense.
template <class T>
void gemm_acc(int m, int n, int k, const T* a, const T* b, T* c) {
  constexpr int kBlockN = 256;
  constexpr int kBlockK = 128;
  for (int j0 = 0; j0 < n; j0 += kBlockN) {
    const int j1 = std::min(n, j0 + kBlockN);
    for (int k0 = 0; k0 < k; k0 += kBlockK) {
      const int k1 = std::min(k, k0 + kBlockK);
      for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        const T* arow = a + static_cast<std::size_t>(i) * k;
        for (int kk = k0; kk < k1; ++kk) {
          const T av = arow[kk];
          if (av == T(0)) continue;
          const T* brow = b + static_cast<std::size_t>(kk) * n;
          for (int j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

// dst[cols x rows] = transpose of src[rows x cols].
template <class T>
void transpose(int rows, int cols, const T* src, T* dst) {
  constexpr int kTile = 32;
  for (int r0 = 0; r0 < rows; r0 += kTile) {
    for (int c0 = 0; c0 < cols; c0 += kTile) {
      const int r1 = std::min(rows, r0 + kTile);
      const int c1 = std::min(cols, c0 + kTile);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
        }
      }
    }
  }
}

// Patch geometry of a strided, zero-padded k x k sweep over a (channels, h, w) image.
struct PatchGeometry {
  int channels;
  int height;
  int width;
  int kernel;
  int stride;
  int padding;
  int out_h;
  int out_w;

  int rows() const { return channels * kernel * kernel; }
  int cols() const { return out_h * out_w; }
};

// cols[(ci * k + ky) * k + kx][oy * out_w + ox] = image[ci][oy * s - p + ky][ox * s - p + kx]
template <class T>
void im2col(const PatchGeometry& g, const T* image, T* cols) {
  const int out_plane = g.out_h * g.out_w;
  for (int ci = 0; ci < g.channels; ++ci) {
    const T* chan = image + static_cast<std::size_t>(ci) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + static_cast<std::size_t>((ci * g.kernel + ky) * g.kernel + kx) * out_plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = chan + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
template <class T>
void col2im_acc(const PatchGeometry& g, const T* cols, T* image) {
  const int out_plane = g.out_h * g.out_w;
  for (int ci = 0; ci < g.channels; ++ci) {
    T* chan = image + static_cast<std::size_t>(ci) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row =
            cols + static_cast<std::size_t>((ci * g.kernel + ky) * g.kernel + kx) * out_plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          T* dst = chan + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace zseg::detail
