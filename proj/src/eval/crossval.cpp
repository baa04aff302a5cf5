#include "zseg/crossval.hpp"

#include <chrono>

#include "zseg/errors.hpp"

namespace zseg {

namespace {

void require_ids(const std::vector<PatientRecord>& patients, const std::string& name) {
  if (patients.size() < static_cast<std::size_t>(kFoldCount)) {
    throw ConfigError("dataset " + name + " has " + std::to_string(patients.size()) +
                      " patients; cross-validation needs at least 4");
  }
  for (std::size_t i = 0; i < patients.size(); ++i) {
    if (patients[i].patient_id != static_cast<int>(i) + 1) {
      throw ConfigError("dataset " + name + " patient ids must run 1.." +
                        std::to_string(patients.size()));
    }
  }
}

std::vector<SliceSample> eval_views(const std::vector<SliceSample>& slices,
                                    const PreprocConfig& preproc) {
  std::vector<SliceSample> out;
  out.reserve(slices.size());
  for (const auto& s : slices) out.push_back(eval_view(s, preproc));
  return out;
}

}  // namespace

std::vector<MetricsRow> CrossValResult::rows() const {
  std::vector<MetricsRow> all = fold_rows;
  all.insert(all.end(), summary.begin(), summary.end());
  return all;
}

std::vector<SliceSample> usable_slices(const std::vector<PatientRecord>& patients,
                                       const std::vector<int>& ids, MatrixSize target) {
  std::vector<SliceSample> out;
  for (int id : ids) {
    for (const auto& s : patients.at(static_cast<std::size_t>(id) - 1).slices) {
      if (count(s.wg) > 0) out.push_back(harmonize(s, target));
    }
  }
  return out;
}

CrossValResult run_cross_validation(const std::vector<PatientRecord>& d1,
                                    const std::vector<PatientRecord>& d2,
                                    const CrossValConfig& config, const ProgressSink& progress) {
  config.train.validate();
  require_ids(d1, "d1");
  require_ids(d2, "d2");
  const FoldPlan plan1 = make_folds(static_cast<int>(d1.size()));
  const FoldPlan plan2 = make_folds(static_cast<int>(d2.size()));
  const MatrixSize target = config.train.preproc.target_size;
  const std::string arch = to_string(config.train.architecture);
  const std::string regime = to_string(config.regime);
  if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);
  if (!config.overlay_dir.empty()) std::filesystem::create_directories(config.overlay_dir);

  CrossValResult result;
  for (int fold = 0; fold < kFoldCount; ++fold) {
    const FoldSplit split = fold_split(config.regime, plan1, plan2, fold);
    std::vector<SliceSample> train = usable_slices(d1, split.train_d1, target);
    const std::vector<SliceSample> more = usable_slices(d2, split.train_d2, target);
    train.insert(train.end(), more.begin(), more.end());

    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.train.seed, {static_cast<std::uint64_t>(fold) + 1});
    tc.preproc.seed = tc.seed;
    Trainer trainer(tc);
    if (config.pretrained) trainer.load_weights(*config.pretrained);
    const auto ckpt_path = config.checkpoint_dir / ("fold_" + std::to_string(fold + 1) + ".ckpt");
    if (!config.checkpoint_dir.empty() && std::filesystem::exists(ckpt_path)) {
      trainer.resume(load_checkpoint(ckpt_path));
      if (progress) {
        FoldProgress p;
        p.fold = fold + 1;
        p.stats.epoch = trainer.epoch() - 1;
        p.resumed = true;
        progress(p);
      }
    }
    while (trainer.epoch() < tc.epochs()) {
      const auto t0 = std::chrono::steady_clock::now();
      const EpochStats stats = trainer.train_epoch(train, TargetZone::cg);
      if (!config.checkpoint_dir.empty()) save_checkpoint(trainer.checkpoint(), ckpt_path);
      if (progress) {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        progress(FoldProgress{fold + 1, stats, dt.count(), false});
      }
    }

    const std::pair<std::string, const std::vector<int>*> tests[] = {{"d1", &split.test_d1},
                                                                      {"d2", &split.test_d2}};
    for (const auto& [name, ids] : tests) {
      const auto& source = name == "d1" ? d1 : d2;
      const std::vector<SliceSample> views = eval_views(usable_slices(source, *ids, target), tc.preproc);
      const std::vector<Image> logits = trainer.predict(views, TargetZone::cg);
      std::vector<double> cg_scores;
      std::vector<double> pz_scores;
      for (std::size_t i = 0; i < views.size(); ++i) {
        const SliceSample& v = views[i];
        const ZonalMask z = postprocess(logits[i], v.wg);
        result.zonal_violations += zonal_violations(z);
        const double cg = dsc_metric(z.cg, v.cg);
        const double pz = dsc_metric(z.pz, v.pz);
        cg_scores.push_back(cg);
        pz_scores.push_back(pz);
        result.slices.push_back(SliceScore{fold + 1, name, v.patient_id, v.slice_index, cg, pz});
      }
      if (!config.overlay_dir.empty() && !views.empty()) {
        // Middle slice of the first test patient.
        std::size_t last = 0;
        while (last < views.size() && views[last].patient_id == views[0].patient_id) ++last;
        const std::size_t mid = last / 2;
        const SliceSample& v = views[mid];
        write_overlay(v.image, postprocess(logits[mid], v.wg), ZonalMask{v.wg, v.cg, v.pz},
                      config.overlay_dir /
                          ("fold" + std::to_string(fold + 1) + "_" + name + ".png"));
      }
      const bool pretrained = config.pretrained.has_value();
      const MeanStd cg = mean_std(cg_scores);
      const MeanStd pz = mean_std(pz_scores);
      const std::string f = std::to_string(fold + 1);
      result.fold_rows.push_back(MetricsRow{arch, pretrained, regime, name, "cg", f, cg.mean, cg.std});
      result.fold_rows.push_back(MetricsRow{arch, pretrained, regime, name, "pz", f, pz.mean, pz.std});
    }
  }
  result.summary = aggregate(result.fold_rows);
  return result;
}

}  // namespace zseg
