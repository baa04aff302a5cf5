#include "zseg/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "zseg/rng.hpp"

namespace zseg {

void PhantomConfig::validate() const {
  if (patient_count < 1) throw ConfigError("phantom: patient_count must be >= 1");
  if (slices_per_patient < 1) throw ConfigError("phantom: slices_per_patient must be >= 1");
  if (empty_end_slices < 0 || 2 * empty_end_slices >= slices_per_patient) {
    throw ConfigError("phantom: empty end slices leave no prostate slices");
  }
  if (sizes.empty()) throw ConfigError("phantom: no matrix sizes");
  for (const auto& s : sizes) {
    if (s.height < 32 || s.width < 32 || s.height % 2 != 0 || s.width % 2 != 0) {
      throw ConfigError("phantom: sizes must be even and >= 32, got " + std::to_string(s.height) +
                        "x" + std::to_string(s.width));
    }
  }
}

PhantomConfig phantom_config(DatasetId id, std::uint64_t seed, int patient_count,
                             int slices_per_patient, int divisor) {
  PhantomConfig c;
  c.seed = seed;
  c.patient_count = patient_count;
  c.slices_per_patient = slices_per_patient;
  switch (id) {
    case DatasetId::d2:
      c.style = PhantomStyle::d2_like;
      c.sizes = scaled_descriptor(d2_descriptor(), divisor).matrix_sizes;
      break;
    case DatasetId::promise_like:
      c.style = PhantomStyle::promise_like;
      c.sizes = scaled_descriptor(promise_like_descriptor(), divisor).matrix_sizes;
      c.empty_end_slices = std::max(1, slices_per_patient / 10);
      break;
    case DatasetId::d1:
    case DatasetId::phantom:
      c.style = PhantomStyle::d1_like;
      c.sizes = scaled_descriptor(d1_descriptor(), divisor).matrix_sizes;
      break;
  }
  return c;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Levels {
  double air, fat, muscle, rectum, pz, cg;
  double nodule_amplitude;
  double noise;
  double bias;  // amplitude of the linear bias field
};

Levels levels_for(PhantomStyle style) {
  switch (style) {
    case PhantomStyle::d1_like: return {0.02, 0.45, 0.22, 0.08, 0.80, 0.36, 0.05, 0.03, 0.0};
    case PhantomStyle::d2_like: return {0.04, 0.85, 0.36, 0.15, 0.56, 0.42, 0.09, 0.04, 0.22};
    case PhantomStyle::promise_like: return {0.02, 0.55, 0.25, 0.10, 0.72, 0.40, 0.06, 0.035, 0.08};
  }
  return {};
}

// Closed curve rho < scale * (1 + sum_k amp_k cos(k theta + phase_k)) in a
// rotated, axis-scaled frame.
struct Lobed {
  double cy = 0, cx = 0, a = 1, b = 1, angle = 0;
  std::array<double, 3> amp{};
  std::array<double, 3> phase{};

  bool contains(double y, double x, double scale) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (c * dy - s * dx) / a;
    const double v = (s * dy + c * dx) / b;
    const double rho = std::sqrt(u * u + v * v);
    const double theta = std::atan2(u, v);
    double r = 1.0;
    for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
    return rho < scale * r;
  }
};

Lobed random_lobed(Rng& rng, double cy, double cx, double a, double b, double angle, double wobble) {
  Lobed l;
  l.cy = cy;
  l.cx = cx;
  l.a = a;
  l.b = b;
  l.angle = angle;
  for (int k = 0; k < 3; ++k) {
    l.amp[k] = rng.uniform(-wobble, wobble);
    l.phase[k] = rng.uniform(0.0, kTwoPi);
  }
  return l;
}

struct Blob {
  double cy, cx, radius, amplitude;
};

struct Wave {
  double ky, kx, phase, amplitude;
};

void gaussian_blur(Image& img, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (auto& k : kernel) k /= total;
  const int h = img.height();
  const int w = img.width();
  Image tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * img.at(y, std::clamp(x + i, 0, w - 1));
      }
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x);
      }
      img.at(y, x) = static_cast<float>(acc);
    }
  }
}

// Patient-level anatomy; slices vary the scale along the gland axis.
struct Anatomy {
  MatrixSize size;
  double extent;  // min(h, w), the reference length
  Lobed body, wg, cg, rectum;
  double cg_shift;  // anterior shift of the CG center, in pixels
  Levels levels;
  std::vector<Blob> nodules;  // relative to the CG center, in units of CG axes
  std::vector<Wave> texture;
  double bias_angle = 0.0;
};

Anatomy make_anatomy(const PhantomConfig& config, int patient_id, Rng& rng) {
  Anatomy an;
  an.size = config.sizes[static_cast<std::size_t>(patient_id - 1) % config.sizes.size()];
  const double h = an.size.height;
  const double w = an.size.width;
  const double s = std::min(h, w);
  an.extent = s;
  an.levels = levels_for(config.style);
  an.levels.pz += rng.uniform(-0.04, 0.04);
  an.levels.cg += rng.uniform(-0.04, 0.04);
  an.levels.fat += rng.uniform(-0.05, 0.05);

  const double cy = h / 2.0 + rng.uniform(-0.03, 0.03) * s;
  const double cx = w / 2.0 + rng.uniform(-0.03, 0.03) * s;
  const double angle = rng.uniform(-0.15, 0.15);
  an.body = random_lobed(rng, h / 2.0, w / 2.0, 0.40 * h, 0.46 * w, 0.0, 0.03);
  const double wg_a = rng.uniform(0.16, 0.21) * s;
  const double wg_b = rng.uniform(0.21, 0.27) * s;
  an.wg = random_lobed(rng, cy, cx, wg_a, wg_b, angle, 0.05);
  an.cg_shift = rng.uniform(0.10, 0.20) * wg_a;
  an.cg = random_lobed(rng, cy - an.cg_shift, cx, rng.uniform(0.55, 0.68) * wg_a,
                       rng.uniform(0.58, 0.72) * wg_b, angle + rng.uniform(-0.1, 0.1), 0.06);
  an.rectum = random_lobed(rng, cy + wg_a + 0.09 * s, cx, 0.07 * s, 0.10 * s, 0.0, 0.05);

  const int nodules = 2 + static_cast<int>(rng.uniform_int(3));
  for (int i = 0; i < nodules; ++i) {
    an.nodules.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.2, 0.45),
                          rng.uniform(-1.0, 1.0) * an.levels.nodule_amplitude});
  }
  for (int i = 0; i < 3; ++i) {
    an.texture.push_back({rng.uniform(-1.0, 1.0) * kTwoPi / (0.25 * s),
                          rng.uniform(-1.0, 1.0) * kTwoPi / (0.25 * s), rng.uniform(0.0, kTwoPi),
                          rng.uniform(0.01, 0.03)});
  }
  an.bias_angle = rng.uniform(0.0, kTwoPi);
  return an;
}

SliceSample render_slice(const Anatomy& an, int patient_id, int slice_index, double t,
                         bool has_prostate, Rng& rng) {
  const int h = an.size.height;
  const int w = an.size.width;
  // t in (-1, 1) runs from base to apex; the gland tapers at both ends and
  // the CG shrinks faster than the WG.
  const double wg_scale = std::sqrt(1.0 - 0.55 * t * t);
  const double cg_scale = wg_scale * std::sqrt(1.0 - 0.35 * t * t);
  Lobed cg = an.cg;
  cg.cx += rng.uniform(-0.01, 0.01) * an.extent;
  cg.cy += rng.uniform(-0.01, 0.01) * an.extent;
  const Levels& lv = an.levels;

  SliceSample s;
  s.patient_id = patient_id;
  s.slice_index = slice_index;
  s.wg = Mask(h, w);
  s.cg = Mask(h, w);
  Image img(h, w);
  const double c = std::cos(an.bias_angle);
  const double sn = std::sin(an.bias_angle);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double py = y + 0.5;
      const double px = x + 0.5;
      double v = lv.air;
      if (an.body.contains(py, px, 1.0)) {
        v = lv.fat;
        if (an.wg.contains(py, px, 1.45 * wg_scale)) v = lv.muscle;
        if (an.rectum.contains(py, px, 1.0)) v = lv.rectum;
        for (const auto& wave : an.texture) {
          v += wave.amplitude * std::sin(wave.ky * py + wave.kx * px + wave.phase);
        }
      }
      if (has_prostate && an.wg.contains(py, px, wg_scale)) {
        s.wg.at(y, x) = 1;
        // Keep a PZ rim: the CG never reaches the outer 10% of the gland.
        if (cg.contains(py, px, cg_scale) && an.wg.contains(py, px, 0.9 * wg_scale)) {
          s.cg.at(y, x) = 1;
          v = lv.cg;
          for (const auto& n : an.nodules) {
            const double dy = (py - cg.cy) / (cg.a * cg_scale) - n.cy;
            const double dx = (px - cg.cx) / (cg.b * cg_scale) - n.cx;
            v += n.amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * n.radius * n.radius));
          }
        } else {
          v = lv.pz;
        }
      }
      if (lv.bias != 0.0) {
        const double ry = (py - h / 2.0) / an.extent;
        const double rx = (px - w / 2.0) / an.extent;
        v *= 1.0 + lv.bias * 2.0 * (c * rx + sn * ry);
      }
      img.at(y, x) = static_cast<float>(v);
    }
  }
  gaussian_blur(img, 0.8 * an.extent / 72.0);
  for (auto& v : img.data()) {
    v = static_cast<float>(std::clamp(v + lv.noise * rng.normal(), 0.0, 1.0));
  }
  s.image = normalize_min_max(img);
  s.pz = mask_and_not(s.wg, s.cg);
  return s;
}

}  // namespace

std::vector<PatientRecord> generate_phantom_dataset(const PhantomConfig& config) {
  config.validate();
  std::vector<PatientRecord> out;
  const int prostate_slices = config.slices_per_patient - 2 * config.empty_end_slices;
  for (int p = 1; p <= config.patient_count; ++p) {
    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(config.style), static_cast<std::uint64_t>(p)}));
    const Anatomy anatomy = make_anatomy(config, p, rng);
    PatientRecord record;
    record.patient_id = p;
    for (int k = 0; k < config.slices_per_patient; ++k) {
      const int inner = k - config.empty_end_slices;
      const bool has_prostate = inner >= 0 && inner < prostate_slices;
      const double t = has_prostate ? 2.0 * (inner + 0.5) / prostate_slices - 1.0 : 1.0;
      record.slices.push_back(render_slice(anatomy, p, k + 1, t, has_prostate, rng));
    }
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace zseg
