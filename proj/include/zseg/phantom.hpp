#pragma once

#include <cstdint>
#include <vector>

#include "zseg/dataset.hpp"

namespace zseg {

/// Contrast conventions of the synthetic data. d1_like: strong PZ/CG
/// contrast on a dark background. d2_like: brighter fat, weaker zonal
/// contrast, a smooth multiplicative bias field and nodular CG texture.
/// promise_like: d1-like contrast with prostate-free slices at both ends.
enum class PhantomStyle { d1_like, d2_like, promise_like };

struct PhantomConfig {
  std::uint64_t seed = 1;
  PhantomStyle style = PhantomStyle::d1_like;
  int patient_count = 4;
  int slices_per_patient = 8;
  /// Patients cycle through these sizes. Each dimension must be even and >= 32.
  std::vector<MatrixSize> sizes{{72, 72}};
  /// Leading and trailing slices without prostate (promise_like only).
  int empty_end_slices = 0;

  /// Throws ConfigError on invalid sizes or counts.
  void validate() const;
};

/// Default configuration for a dataset at 1/`divisor` scale: style, matrix
/// sizes and, for promise_like, empty end slices.
PhantomConfig phantom_config(DatasetId id, std::uint64_t seed, int patient_count,
                             int slices_per_patient, int divisor);

/// Deterministic synthetic patients. Each slice holds a lobed elliptical WG
/// containing an anteriorly shifted CG, so cg is a strict subset of wg and
/// the PZ is nonempty; CG is hypo-intense relative to PZ. Images are
/// normalized to [0, 1]. The output depends only on the config.
std::vector<PatientRecord> generate_phantom_dataset(const PhantomConfig& config);

}  // namespace zseg
