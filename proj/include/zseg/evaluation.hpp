#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zseg/dataset.hpp"
#include "zseg/metrics_io.hpp"
#include "zseg/png_io.hpp"
#include "zseg/postprocess.hpp"

namespace zseg {

/// 2|S & G| / (|S| + |G|) * 100. Two empty masks agree perfectly (100).
/// Throws ShapeError on a shape mismatch.
double dsc_metric(const Mask& segmentation, const Mask& gold);

/// Four disjoint groups of 1-based patient ids covering 1..n.
struct FoldPlan {
  std::vector<std::vector<int>> groups;

  /// Throws InvariantError unless the groups partition 1..patient_count.
  void validate(int patient_count) const;
};

inline constexpr int kFoldCount = 4;

/// 21 and 19 patients give {1-5, 6-10, 11-15, 16-n}. Other counts are split
/// into contiguous groups whose sizes differ by at most one, larger groups
/// first. Throws ConfigError for fewer than 4 patients.
FoldPlan make_folds(int patient_count);
FoldPlan make_folds(const DatasetDescriptor& descriptor);

enum class TrainRegime { d1, d2, mixed };

std::string to_string(TrainRegime regime);
/// Throws ConfigError on an unknown name.
TrainRegime parse_regime(const std::string& name);

/// Patient ids used in one cross-validation round.
struct FoldSplit {
  std::vector<int> train_d1;
  std::vector<int> train_d2;
  std::vector<int> test_d1;
  std::vector<int> test_d2;
};

/// Round `fold` (0-based). A single-dataset regime trains on the other
/// groups of its dataset and tests on the held-out group plus the whole
/// other dataset; mixed trains on both and tests each held-out group.
FoldSplit fold_split(TrainRegime regime, const FoldPlan& d1, const FoldPlan& d2, int fold);

/// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

/// One "all" row per (arch, pretrained, regime, test set, zone) group of
/// per-fold rows, in first-appearance order: mean and population std of
/// the fold means. Existing "all" rows in the input are ignored.
std::vector<MetricsRow> aggregate(const std::vector<MetricsRow>& fold_rows);

/// Mask pixels with at least one 8-neighbor outside the mask; the frame
/// edge counts as outside.
Mask boundary(const Mask& m);

inline constexpr Rgb kPredictedCgColor{255, 64, 64};
inline constexpr Rgb kGoldCgColor{64, 255, 64};
inline constexpr Rgb kGoldPzColor{64, 128, 255};

/// Grayscale image with contours drawn in order: gold PZ, gold CG,
/// predicted CG (later colors win).
Grid<Rgb> render_overlay(const Image& image, const ZonalMask& predicted,
                         const ZonalMask& gold);
void write_overlay(const Image& image, const ZonalMask& predicted, const ZonalMask& gold,
                   const std::filesystem::path& path);

}  // namespace zseg
