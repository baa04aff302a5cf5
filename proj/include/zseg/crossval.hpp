#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zseg/evaluation.hpp"
#include "zseg/trainer.hpp"

namespace zseg {

struct CrossValConfig {
  TrainConfig train;
  TrainRegime regime = TrainRegime::mixed;
  /// Fine-tuning start shared by every fold; the weights must match `train`.
  std::optional<Checkpoint> pretrained;
  /// When set, each fold checkpoints after every epoch to fold_<k>.ckpt and
  /// resumes from an existing file.
  std::filesystem::path checkpoint_dir;
  /// When set, one overlay per fold and test set is written here.
  std::filesystem::path overlay_dir;
};

/// Per-slice outcome after post-processing.
struct SliceScore {
  int fold = 0;  // 1-based
  std::string test_dataset;
  int patient_id = 0;
  int slice_index = 0;
  double cg = 0.0;
  double pz = 0.0;
};

struct FoldProgress {
  int fold = 0;  // 1-based
  EpochStats stats;
  double seconds = 0.0;
  bool resumed = false;  // epoch restored from a checkpoint, not trained
};

using ProgressSink = std::function<void(const FoldProgress&)>;

struct CrossValResult {
  std::vector<MetricsRow> fold_rows;  // 4 folds x 2 test sets x 2 zones
  std::vector<MetricsRow> summary;    // "all" rows
  std::vector<SliceScore> slices;
  std::size_t zonal_violations = 0;

  /// Fold rows followed by the summary, as written to the metrics CSV.
  std::vector<MetricsRow> rows() const;
};

/// Harmonized copies of every slice whose WG is not empty.
std::vector<SliceSample> usable_slices(const std::vector<PatientRecord>& patients,
                                       const std::vector<int>& ids, MatrixSize target);

/// Four rounds of train-then-evaluate on patient-level splits. Each fold
/// trains a fresh model seeded from (seed, fold), or the pretrained weights,
/// then scores CG and PZ Dice per test slice after post-processing; fold
/// rows hold the mean and population std over slices. Throws ConfigError
/// when a dataset the regime needs is missing or ids are not 1..n.
CrossValResult run_cross_validation(const std::vector<PatientRecord>& d1,
                                    const std::vector<PatientRecord>& d2,
                                    const CrossValConfig& config,
                                    const ProgressSink& progress = {});

}  // namespace zseg
