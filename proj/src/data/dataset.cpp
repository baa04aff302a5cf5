#include "zseg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "zseg/png_io.hpp"

namespace zseg {

namespace fs = std::filesystem;

std::string to_string(DatasetId id) {
  switch (id) {
    case DatasetId::d1: return "d1";
    case DatasetId::d2: return "d2";
    case DatasetId::promise_like: return "promise_like";
    case DatasetId::phantom: return "phantom";
  }
  return "unknown";
}

DatasetId parse_dataset_id(const std::string& name) {
  if (name == "d1") return DatasetId::d1;
  if (name == "d2") return DatasetId::d2;
  if (name == "promise_like") return DatasetId::promise_like;
  if (name == "phantom") return DatasetId::phantom;
  throw ConfigError("unknown dataset id '" + name + "'");
}

void DatasetDescriptor::validate() const {
  auto positive = [](double v) { return v > 0.0; };
  if (matrix_sizes.empty()) throw ConfigError(to_string(id) + ": no matrix sizes");
  for (const auto& m : matrix_sizes) {
    if (m.height <= 0 || m.width <= 0) throw ConfigError(to_string(id) + ": bad matrix size");
  }
  if (!positive(slice_thickness_mm) || !positive(inter_slice_spacing_mm) ||
      pixel_spacing_mm.empty() || !std::all_of(pixel_spacing_mm.begin(), pixel_spacing_mm.end(), positive) ||
      slices_per_patient <= 0 || patient_count <= 0) {
    throw ConfigError(to_string(id) + ": geometry values must be positive");
  }
}

DatasetDescriptor d1_descriptor() {
  return {DatasetId::d1, {{288, 288}}, 3.0, 4.0, {0.625}, 18, 21};
}

DatasetDescriptor d2_descriptor() {
  return {DatasetId::d2,
          {{308, 384}, {336, 448}, {360, 448}, {368, 448}},
          1.25,
          1.0,
          {0.676, 0.721, 0.881, 0.789},
          64,
          19};
}

DatasetDescriptor promise_like_descriptor() {
  return {DatasetId::promise_like, {{512, 512}}, 3.6, 3.6, {0.625}, 32, 50};
}

DatasetDescriptor scaled_descriptor(const DatasetDescriptor& base, int divisor) {
  if (divisor < 1) throw ConfigError("scale divisor must be >= 1");
  DatasetDescriptor out = base;
  // Rounded to even sizes so that every scaled geometry can be center-cropped
  // and halved symmetrically.
  auto even = [divisor](int v) {
    return 2 * static_cast<int>(std::lround(static_cast<double>(v) / divisor / 2.0));
  };
  for (auto& m : out.matrix_sizes) {
    m.height = even(m.height);
    m.width = even(m.width);
  }
  for (auto& s : out.pixel_spacing_mm) s *= divisor;
  return out;
}

void validate_slice(const SliceSample& s) {
  const std::string where = "patient " + std::to_string(s.patient_id) + " slice " +
                            std::to_string(s.slice_index);
  if (!s.image.same_shape(s.wg) || !s.image.same_shape(s.cg) ||
      (!s.pz.empty() && !s.image.same_shape(s.pz))) {
    throw DataError(where + ": mask shape does not match image " + s.image.shape_str());
  }
  const std::size_t outside = count_outside(s.cg, s.wg);
  if (outside > 0) {
    throw DataError(where + ": " + std::to_string(outside) + " CG pixels lie outside the WG");
  }
  if (!s.pz.empty() && s.pz != mask_and_not(s.wg, s.cg)) {
    throw DataError(where + ": PZ is not WG minus CG");
  }
}

namespace {

std::string numbered(const char* prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix, n);
  return buf;
}

// Parses "<prefix>_<digits>" (with an optional suffix after the digits).
bool parse_numbered(const std::string& name, const std::string& prefix, int& number,
                    std::string& rest) {
  if (name.rfind(prefix + "_", 0) != 0) return false;
  std::size_t pos = prefix.size() + 1;
  std::size_t end = pos;
  while (end < name.size() && std::isdigit(static_cast<unsigned char>(name[end]))) ++end;
  if (end == pos) return false;
  number = std::stoi(name.substr(pos, end - pos));
  rest = name.substr(end);
  return true;
}

}  // namespace

fs::path patient_dir(const fs::path& root, DatasetId id, int patient_id) {
  return root / to_string(id) / numbered("patient", patient_id);
}

std::vector<PatientRecord> load_dataset(const fs::path& root, const DatasetDescriptor& descriptor) {
  const fs::path base = root / to_string(descriptor.id);
  if (!fs::is_directory(base)) throw DataError("dataset directory not found: " + base.string());
  std::map<int, fs::path> patients;
  for (const auto& entry : fs::directory_iterator(base)) {
    int id = 0;
    std::string rest;
    if (entry.is_directory() && parse_numbered(entry.path().filename().string(), "patient", id, rest) &&
        rest.empty()) {
      if (!patients.emplace(id, entry.path()).second) {
        throw DataError("duplicate patient id " + std::to_string(id) + " in " + base.string());
      }
    }
  }
  if (patients.empty()) throw DataError("no patient_<NNN> directories in " + base.string());

  std::vector<PatientRecord> out;
  for (const auto& [id, dir] : patients) {
    std::map<int, std::string> slices;  // slice index -> file stem
    for (const auto& entry : fs::directory_iterator(dir)) {
      int index = 0;
      std::string rest;
      const std::string name = entry.path().filename().string();
      if (parse_numbered(name, "slice", index, rest) && rest == "_img.png") {
        slices.emplace(index, name.substr(0, name.size() - rest.size()));
      }
    }
    if (slices.empty()) throw DataError("patient " + std::to_string(id) + ": no slice images");
    PatientRecord record;
    record.patient_id = id;
    for (const auto& [index, stem] : slices) {
      const std::string where =
          "patient " + std::to_string(id) + " slice " + std::to_string(index);
      SliceSample s;
      s.patient_id = id;
      s.slice_index = index;
      for (const char* suffix : {"_wg.png", "_cg.png"}) {
        if (!fs::exists(dir / (stem + suffix))) {
          throw DataError(where + ": missing mask file " + (dir / (stem + suffix)).string());
        }
      }
      const Grid<std::uint16_t> raw = read_png_gray(dir / (stem + "_img.png"));
      Image image(raw.height(), raw.width());
      for (std::size_t i = 0; i < raw.size(); ++i) image[i] = static_cast<float>(raw[i]);
      s.image = normalize_min_max(image);
      s.wg = read_png_mask(dir / (stem + "_wg.png"));
      s.cg = read_png_mask(dir / (stem + "_cg.png"));
      if (!s.image.same_shape(s.wg) || !s.image.same_shape(s.cg)) {
        throw DataError(where + ": mask shape does not match image " + s.image.shape_str());
      }
      s.pz = mask_and_not(s.wg, s.cg);
      validate_slice(s);
      record.slices.push_back(std::move(s));
    }
    out.push_back(std::move(record));
  }
  return out;
}

void write_dataset(const fs::path& root, DatasetId id, const std::vector<PatientRecord>& patients) {
  for (const auto& p : patients) {
    const fs::path dir = patient_dir(root, id, p.patient_id);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& s : p.slices) {
      validate_slice(s);
      const std::string stem = numbered("slice", s.slice_index);
      Grid<std::uint16_t> raw(s.image.height(), s.image.width());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(static_cast<double>(s.image[i]), 0.0, 1.0);
        raw[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      }
      write_png_gray16(dir / (stem + "_img.png"), raw);
      write_png_mask(dir / (stem + "_wg.png"), s.wg);
      write_png_mask(dir / (stem + "_cg.png"), s.cg);
    }
  }
}

}  // namespace zseg
