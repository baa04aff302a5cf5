#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zseg/image.hpp"

namespace zseg {

enum class DatasetId { d1, d2, promise_like, phantom };

std::string to_string(DatasetId id);
/// Throws ConfigError on an unknown name.
DatasetId parse_dataset_id(const std::string& name);

struct MatrixSize {
  int height = 0;
  int width = 0;
  bool operator==(const MatrixSize&) const = default;
};

/// Acquisition geometry of one dataset.
struct DatasetDescriptor {
  DatasetId id = DatasetId::phantom;
  std::vector<MatrixSize> matrix_sizes;
  double slice_thickness_mm = 0.0;
  double inter_slice_spacing_mm = 0.0;
  std::vector<double> pixel_spacing_mm;
  int slices_per_patient = 0;
  int patient_count = 0;

  /// Throws ConfigError if any geometry value is not positive.
  void validate() const;
};

DatasetDescriptor d1_descriptor();
DatasetDescriptor d2_descriptor();
DatasetDescriptor promise_like_descriptor();
/// Matrix sizes divided by `divisor` (rounded to the nearest even size) and pixel spacing
/// multiplied by it, for desk-scale phantoms.
DatasetDescriptor scaled_descriptor(const DatasetDescriptor& base, int divisor);

/// One axial slice. Image intensities are min-max normalized to [0, 1].
struct SliceSample {
  Image image;
  Mask wg;
  Mask cg;
  Mask pz;  // wg \ cg
  int patient_id = 0;
  int slice_index = 0;
};

struct PatientRecord {
  int patient_id = 0;  // 1-based
  std::vector<SliceSample> slices;
};

/// Checks shapes, cg within wg and pz == wg \ cg. Throws DataError naming
/// the slice and the number of offending pixels.
void validate_slice(const SliceSample& s);

/// Directory of one patient: <root>/<dataset_id>/patient_<NNN>.
std::filesystem::path patient_dir(const std::filesystem::path& root, DatasetId id, int patient_id);

/// Reads every patient_<NNN> directory under <root>/<dataset_id>, sorted by
/// id. Each slice_<MMM> needs _img, _wg and _cg PNGs. Throws DataError on
/// missing files, shape mismatches or cg outside wg.
std::vector<PatientRecord> load_dataset(const std::filesystem::path& root,
                                        const DatasetDescriptor& descriptor);

/// Writes the layout read by `load_dataset`; images are stored as 16-bit
/// grayscale scaled from [0, 1].
void write_dataset(const std::filesystem::path& root, DatasetId id,
                   const std::vector<PatientRecord>& patients);

}  // namespace zseg
