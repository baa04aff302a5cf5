#pragma once

#include <functional>
#include <string>
#include <vector>

#include "zseg/dataset.hpp"
#include "zseg/rng.hpp"

namespace zseg {

struct PreprocConfig {
  MatrixSize target_size{288, 288};
  MatrixSize crop_size{256, 256};
  double flip_probability = 0.5;
  std::uint64_t seed = 1;

  /// Throws ConfigError unless crop_size <= target_size componentwise.
  void validate() const;
};

/// 72x72 harmonized slices cropped to 64x64.
PreprocConfig desk_preproc(std::uint64_t seed);

/// Window of size `target` at offsets floor((H-h)/2), floor((W-w)/2).
/// Throws ShapeError if the input is smaller than the target.
template <class T>
Grid<T> center_crop(const Grid<T>& in, MatrixSize target);

template <class T>
Grid<T> crop(const Grid<T>& in, int top, int left, MatrixSize size);

template <class T>
Grid<T> flip_horizontal(const Grid<T>& in);

/// Bilinear with the half-pixel (corners not aligned) convention:
/// src = (dst + 0.5) * in / out - 0.5, clamped at the borders.
Image resize_bilinear(const Image& in, MatrixSize target);
/// Nearest neighbor, src = floor((dst + 0.5) * in / out). Output stays binary.
Mask resize_nearest(const Mask& in, MatrixSize target);

/// Pixel-wise product; the result is exactly zero off the mask.
Image apply_wg_mask(const Image& image, const Mask& wg);

/// Largest centered square crop followed by resizing to `target`: bilinear
/// for the image, nearest for masks. Identity on slices already at target.
SliceSample harmonize(const SliceSample& s, MatrixSize target);

/// Training view: one uniform crop offset in [0, target - crop] per axis and
/// a horizontal flip with the configured probability, applied identically to
/// image and masks. Input must be at target_size.
SliceSample augment(const SliceSample& s, const PreprocConfig& config, Rng& rng);

/// Evaluation view: center crop, no flip.
SliceSample eval_view(const SliceSample& s, const PreprocConfig& config);

inline constexpr int kPretrainSlicesPerSample = 25;

using WarningSink = std::function<void(const std::string&)>;

/// Drops slices with an empty WG, keeps the center-most 25 of the rest
/// (all of them, with a warning, if fewer) and harmonizes to target_size.
/// The WG is the segmentation target for these samples.
std::vector<SliceSample> prepare_pretraining_data(const std::vector<PatientRecord>& samples,
                                                  const PreprocConfig& config,
                                                  const WarningSink& warn = {});

}  // namespace zseg
