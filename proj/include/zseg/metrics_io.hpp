#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace zseg {

/// One CSV row: a fold result ("1".."4", mean and std over test slices) or
/// a summary ("all", mean and population std over folds).
struct MetricsRow {
  std::string arch;
  bool pretrained = false;
  std::string train_regime;
  std::string test_dataset;
  std::string zone;
  std::string fold;
  double dsc_mean = 0.0;
  double dsc_std = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader =
    "arch,pretrained,train_regime,test_dataset,zone,fold,dsc_mean,dsc_std";

/// Header plus one line per row, values with four decimals.
std::string format_metrics(const std::vector<MetricsRow>& rows);
void write_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
/// Throws DataError on a wrong header or malformed line.
std::vector<MetricsRow> parse_metrics(const std::string& text, const std::string& source = "csv");
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

}  // namespace zseg
