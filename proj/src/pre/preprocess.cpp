#include "zseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace zseg {

void PreprocConfig::validate() const {
  if (crop_size.height <= 0 || crop_size.width <= 0 || target_size.height <= 0 ||
      target_size.width <= 0) {
    throw ConfigError("preprocessing sizes must be positive");
  }
  if (crop_size.height > target_size.height || crop_size.width > target_size.width) {
    throw ConfigError("crop size must not exceed the target size");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ConfigError("flip probability must be in [0, 1]");
  }
}

PreprocConfig desk_preproc(std::uint64_t seed) {
  PreprocConfig c;
  c.target_size = {72, 72};
  c.crop_size = {64, 64};
  c.seed = seed;
  return c;
}

template <class T>
Grid<T> crop(const Grid<T>& in, int top, int left, MatrixSize size) {
  if (top < 0 || left < 0 || top + size.height > in.height() || left + size.width > in.width()) {
    throw ShapeError("crop window " + std::to_string(size.height) + "x" + std::to_string(size.width) +
                     " at (" + std::to_string(top) + ", " + std::to_string(left) +
                     ") exceeds " + in.shape_str());
  }
  Grid<T> out(size.height, size.width);
  for (int y = 0; y < size.height; ++y) {
    std::copy_n(&in.at(top + y, left), size.width, &out.at(y, 0));
  }
  return out;
}

template <class T>
Grid<T> center_crop(const Grid<T>& in, MatrixSize target) {
  if (in.height() < target.height || in.width() < target.width) {
    throw ShapeError("center_crop: input " + in.shape_str() + " smaller than target " +
                     std::to_string(target.height) + "x" + std::to_string(target.width));
  }
  return crop(in, (in.height() - target.height) / 2, (in.width() - target.width) / 2, target);
}

template <class T>
Grid<T> flip_horizontal(const Grid<T>& in) {
  Grid<T> out(in.height(), in.width());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) out.at(y, x) = in.at(y, in.width() - 1 - x);
  }
  return out;
}

template Grid<float> crop(const Grid<float>&, int, int, MatrixSize);
template Grid<std::uint8_t> crop(const Grid<std::uint8_t>&, int, int, MatrixSize);
template Grid<float> center_crop(const Grid<float>&, MatrixSize);
template Grid<std::uint8_t> center_crop(const Grid<std::uint8_t>&, MatrixSize);
template Grid<float> flip_horizontal(const Grid<float>&);
template Grid<std::uint8_t> flip_horizontal(const Grid<std::uint8_t>&);

namespace {

void check_target(MatrixSize t) {
  if (t.height <= 0 || t.width <= 0) throw ShapeError("resize: target must be positive");
}

}  // namespace

Image resize_bilinear(const Image& in, MatrixSize target) {
  check_target(target);
  if (in.empty()) throw ShapeError("resize: empty input");
  if (in.height() == target.height && in.width() == target.width) return in;
  Image out(target.height, target.width);
  const double sy = static_cast<double>(in.height()) / target.height;
  const double sx = static_cast<double>(in.width()) / target.width;
  for (int y = 0; y < target.height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target.width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in.width() - 1);
      const double wx = fx - x0;
      const double top = in.at(y0, x0) * (1.0 - wx) + in.at(y0, x1) * wx;
      const double bottom = in.at(y1, x0) * (1.0 - wx) + in.at(y1, x1) * wx;
      out.at(y, x) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
    }
  }
  return out;
}

Mask resize_nearest(const Mask& in, MatrixSize target) {
  check_target(target);
  if (in.empty()) throw ShapeError("resize: empty input");
  Mask out(target.height, target.width);
  for (int y = 0; y < target.height; ++y) {
    const int sy = std::min(static_cast<int>(std::floor((y + 0.5) * in.height() / target.height)),
                            in.height() - 1);
    for (int x = 0; x < target.width; ++x) {
      const int sx = std::min(static_cast<int>(std::floor((x + 0.5) * in.width() / target.width)),
                              in.width() - 1);
      out.at(y, x) = in.at(sy, sx) ? 1 : 0;
    }
  }
  return out;
}

Image apply_wg_mask(const Image& image, const Mask& wg) {
  require_same_shape(image, wg, "apply_wg_mask");
  Image out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = wg[i] ? image[i] : 0.0f;
  return out;
}

namespace {

template <class F, class G>
SliceSample map_sample(const SliceSample& s, F&& on_image, G&& on_mask) {
  SliceSample out;
  out.patient_id = s.patient_id;
  out.slice_index = s.slice_index;
  out.image = on_image(s.image);
  out.wg = on_mask(s.wg);
  out.cg = on_mask(s.cg);
  out.pz = s.pz.empty() ? Mask() : on_mask(s.pz);
  return out;
}

}  // namespace

SliceSample harmonize(const SliceSample& s, MatrixSize target) {
  const int side = std::min(s.image.height(), s.image.width());
  const MatrixSize square{side, side};
  SliceSample out = map_sample(
      s, [&](const Image& im) { return resize_bilinear(center_crop(im, square), target); },
      [&](const Mask& m) { return resize_nearest(center_crop(m, square), target); });
  // Nearest sampling of each mask keeps cg within wg; recompute pz so the
  // zonal identity holds exactly after resampling.
  out.pz = mask_and_not(out.wg, out.cg);
  return out;
}

SliceSample augment(const SliceSample& s, const PreprocConfig& config, Rng& rng) {
  config.validate();
  if (s.image.height() != config.target_size.height || s.image.width() != config.target_size.width) {
    throw ShapeError("augment: expected " + std::to_string(config.target_size.height) + "x" +
                     std::to_string(config.target_size.width) + " input, got " +
                     s.image.shape_str());
  }
  const int top = static_cast<int>(
      rng.uniform_int(static_cast<std::size_t>(config.target_size.height - config.crop_size.height + 1)));
  const int left = static_cast<int>(
      rng.uniform_int(static_cast<std::size_t>(config.target_size.width - config.crop_size.width + 1)));
  const bool flip = rng.bernoulli(config.flip_probability);
  auto transform = [&](const auto& g) {
    auto c = crop(g, top, left, config.crop_size);
    return flip ? flip_horizontal(c) : c;
  };
  return map_sample(s, transform, transform);
}

SliceSample eval_view(const SliceSample& s, const PreprocConfig& config) {
  auto transform = [&](const auto& g) { return center_crop(g, config.crop_size); };
  return map_sample(s, transform, transform);
}

std::vector<SliceSample> prepare_pretraining_data(const std::vector<PatientRecord>& samples,
                                                  const PreprocConfig& config,
                                                  const WarningSink& warn) {
  std::vector<SliceSample> out;
  for (const auto& patient : samples) {
    std::vector<const SliceSample*> with_prostate;
    for (const auto& s : patient.slices) {
      if (count(s.wg) > 0) with_prostate.push_back(&s);
    }
    std::size_t first = 0;
    std::size_t keep = with_prostate.size();
    if (keep > static_cast<std::size_t>(kPretrainSlicesPerSample)) {
      first = (keep - kPretrainSlicesPerSample) / 2;
      keep = kPretrainSlicesPerSample;
    } else if (keep < static_cast<std::size_t>(kPretrainSlicesPerSample) && warn) {
      warn("pretraining sample " + std::to_string(patient.patient_id) + " has only " +
           std::to_string(keep) + " slices with prostate; keeping all of them");
    }
    for (std::size_t i = first; i < first + keep; ++i) {
      out.push_back(harmonize(*with_prostate[i], config.target_size));
    }
  }
  return out;
}

}  // namespace zseg
