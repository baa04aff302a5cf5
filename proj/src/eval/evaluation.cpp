#include "zseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "zseg/errors.hpp"

namespace zseg {

double dsc_metric(const Mask& segmentation, const Mask& gold) {
  require_same_shape(segmentation, gold, "dsc_metric");
  std::size_t s = 0;
  std::size_t g = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    s += segmentation[i] ? 1 : 0;
    g += gold[i] ? 1 : 0;
    both += segmentation[i] && gold[i] ? 1 : 0;
  }
  if (s + g == 0) return 100.0;
  return 200.0 * static_cast<double>(both) / static_cast<double>(s + g);
}

void FoldPlan::validate(int patient_count) const {
  if (groups.size() != static_cast<std::size_t>(kFoldCount)) {
    throw InvariantError("fold plan must have " + std::to_string(kFoldCount) + " groups");
  }
  std::vector<int> seen(static_cast<std::size_t>(patient_count) + 1, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw InvariantError("empty fold group");
    for (int id : g) {
      if (id < 1 || id > patient_count || seen[id]++) {
        throw InvariantError("fold plan repeats or exceeds patient " + std::to_string(id));
      }
    }
  }
  for (int id = 1; id <= patient_count; ++id) {
    if (!seen[id]) throw InvariantError("fold plan misses patient " + std::to_string(id));
  }
}

FoldPlan make_folds(int patient_count) {
  if (patient_count < kFoldCount) {
    throw ConfigError("cross-validation needs at least 4 patients, got " +
                      std::to_string(patient_count));
  }
  std::vector<int> sizes(kFoldCount, patient_count / kFoldCount);
  if (patient_count == 21 || patient_count == 19) {
    // Published partitions: three groups of five, the rest in the last.
    sizes = {5, 5, 5, patient_count - 15};
  } else {
    for (int i = 0; i < patient_count % kFoldCount; ++i) ++sizes[i];
  }
  FoldPlan plan;
  int next = 1;
  for (int size : sizes) {
    auto& g = plan.groups.emplace_back();
    for (int i = 0; i < size; ++i) g.push_back(next++);
  }
  plan.validate(patient_count);
  return plan;
}

FoldPlan make_folds(const DatasetDescriptor& descriptor) {
  return make_folds(descriptor.patient_count);
}

std::string to_string(TrainRegime regime) {
  switch (regime) {
    case TrainRegime::d1: return "d1";
    case TrainRegime::d2: return "d2";
    case TrainRegime::mixed: return "mixed";
  }
  return "?";
}

TrainRegime parse_regime(const std::string& name) {
  if (name == "d1") return TrainRegime::d1;
  if (name == "d2") return TrainRegime::d2;
  if (name == "mixed") return TrainRegime::mixed;
  throw ConfigError("unknown regime '" + name + "' (expected d1, d2 or mixed)");
}

namespace {

std::vector<int> all_ids(const FoldPlan& plan) {
  std::vector<int> ids;
  for (const auto& g : plan.groups) ids.insert(ids.end(), g.begin(), g.end());
  return ids;
}

std::vector<int> all_but(const FoldPlan& plan, int fold) {
  std::vector<int> ids;
  for (int k = 0; k < kFoldCount; ++k) {
    if (k != fold) ids.insert(ids.end(), plan.groups[k].begin(), plan.groups[k].end());
  }
  return ids;
}

}  // namespace

FoldSplit fold_split(TrainRegime regime, const FoldPlan& d1, const FoldPlan& d2, int fold) {
  if (fold < 0 || fold >= kFoldCount) throw ConfigError("fold index out of range");
  FoldSplit s;
  s.test_d1 = regime == TrainRegime::d2 ? all_ids(d1) : d1.groups[fold];
  s.test_d2 = regime == TrainRegime::d1 ? all_ids(d2) : d2.groups[fold];
  if (regime != TrainRegime::d2) s.train_d1 = all_but(d1, fold);
  if (regime != TrainRegime::d1) s.train_d2 = all_but(d2, fold);
  return s;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

std::vector<MetricsRow> aggregate(const std::vector<MetricsRow>& fold_rows) {
  using Key = std::tuple<std::string, bool, std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : fold_rows) {
    if (r.fold == "all") continue;
    const Key key{r.arch, r.pretrained, r.train_regime, r.test_dataset, r.zone};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(r.dsc_mean);
  }
  std::vector<MetricsRow> out;
  for (const auto& key : order) {
    const MeanStd ms = mean_std(groups[key]);
    out.push_back(MetricsRow{std::get<0>(key), std::get<1>(key), std::get<2>(key),
                             std::get<3>(key), std::get<4>(key), "all", ms.mean, ms.std});
  }
  return out;
}

Mask boundary(const Mask& m) {
  const int h = m.height();
  const int w = m.width();
  Mask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.at(y, x)) continue;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy) {
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          const int ny = y + dy;
          const int nx = x + dx;
          edge = ny < 0 || ny >= h || nx < 0 || nx >= w || !m.at(ny, nx);
        }
      }
      out.at(y, x) = edge ? 1 : 0;
    }
  }
  return out;
}

Grid<Rgb> render_overlay(const Image& image, const ZonalMask& predicted, const ZonalMask& gold) {
  require_same_shape(image, predicted.cg, "render_overlay");
  require_same_shape(image, gold.cg, "render_overlay");
  require_same_shape(image, gold.pz, "render_overlay");
  Grid<Rgb> out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    out[i] = Rgb{g, g, g};
  }
  const std::pair<const Mask*, Rgb> layers[] = {
      {&gold.pz, kGoldPzColor}, {&gold.cg, kGoldCgColor}, {&predicted.cg, kPredictedCgColor}};
  for (const auto& [mask, color] : layers) {
    const Mask edge = boundary(*mask);
    for (std::size_t i = 0; i < edge.size(); ++i) {
      if (edge[i]) out[i] = color;
    }
  }
  return out;
}

void write_overlay(const Image& image, const ZonalMask& predicted, const ZonalMask& gold,
                   const std::filesystem::path& path) {
  write_png_rgb(path, render_overlay(image, predicted, gold));
}

}  // namespace zseg
