#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "zseg/cli.hpp"
#include "zseg/crossval.hpp"
#include "zseg/errors.hpp"
#include "zseg/experiment.hpp"

namespace zseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit(std::ostream& out, const json& record) { out << record.dump() << '\n' << std::flush; }

json optimizer_json(const OptimizerConfig& o) {
  json schedule = json::array();
  for (const auto& s : o.schedule) schedule.push_back({{"epoch", s.epoch}, {"multiplier", s.multiplier}});
  json j{{"kind", to_string(o.kind)}, {"lr", o.lr},           {"batch_size", o.batch_size},
         {"epochs", o.epochs},        {"schedule", schedule}, {"weight_decay", o.weight_decay}};
  if (o.kind == OptimizerKind::sgd_momentum) {
    j["momentum"] = o.momentum;
  } else {
    j["beta1"] = o.beta1;
    j["beta2"] = o.beta2;
    j["epsilon"] = o.epsilon;
  }
  return j;
}

json train_json(const TrainConfig& c) {
  json j{{"arch", to_string(c.architecture)},
         {"base_width", c.base_width},
         {"levels", c.levels},
         {"seed", c.seed},
         {"target_size", {c.preproc.target_size.height, c.preproc.target_size.width}},
         {"crop_size", {c.preproc.crop_size.height, c.preproc.crop_size.width}},
         {"flip_probability", c.preproc.flip_probability},
         {"optimizer", optimizer_json(c.optimizer)}};
  if (c.architecture == Architecture::pix2pix) {
    j["discriminator_levels"] = c.discriminator_levels;
    j["discriminator_optimizer"] = optimizer_json(c.discriminator_optimizer);
    j["lambda_seg"] = c.lambda_seg;
  }
  return j;
}

json epoch_json(const EpochStats& s, double seconds) {
  json j{{"event", "epoch"}, {"epoch", s.epoch}, {"loss", s.loss}, {"lr", s.lr},
         {"samples", s.samples}, {"seconds", seconds}};
  if (s.discriminator_loss != 0.0) j["discriminator_loss"] = s.discriminator_loss;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<PatientRecord> load(const ExperimentConfig& cfg, DatasetId id) {
  DatasetDescriptor d;
  d.id = id;
  auto patients = load_dataset(cfg.data_root, d);
  if (patients.empty()) {
    throw DataError("no patients under " + (cfg.data_root / to_string(id)).string());
  }
  return patients;
}

// Training config of a saved network: profile geometry with the stored
// architecture, width and depths.
TrainConfig config_for_checkpoint(ExperimentConfig cfg, const Checkpoint& ckpt) {
  if (!cfg.seed) cfg.seed = 1;  // inference does not draw random numbers
  cfg.arch = parse_architecture(ckpt.architecture);
  cfg.base_width = static_cast<int>(ckpt.base_width);
  cfg.levels = static_cast<int>(ckpt.levels);
  if (ckpt.discriminator_levels > 0) cfg.discriminator_levels = static_cast<int>(ckpt.discriminator_levels);
  return cfg.train_config();
}

const fs::path& require_checkpoint(const ExperimentConfig& cfg) {
  if (!cfg.checkpoint) throw ConfigError("--checkpoint is required");
  return *cfg.checkpoint;
}

DatasetId require_test_dataset(const ExperimentConfig& cfg) {
  if (!cfg.dataset || (*cfg.dataset != DatasetId::d1 && *cfg.dataset != DatasetId::d2)) {
    throw ConfigError("--dataset must be d1 or d2");
  }
  return *cfg.dataset;
}

int cmd_generate_phantoms(const ExperimentConfig& cfg, std::ostream& out) {
  for (DatasetId id : {DatasetId::d1, DatasetId::d2, DatasetId::promise_like}) {
    const PhantomConfig pc = cfg.phantom_layout(id);
    const auto patients = generate_phantom_dataset(pc);
    fs::remove_all(cfg.out / to_string(id));
    write_dataset(cfg.out, id, patients);
    std::size_t slices = 0;
    for (const auto& p : patients) slices += p.slices.size();
    json sizes = json::array();
    for (const auto& s : pc.sizes) sizes.push_back(std::to_string(s.height) + "x" + std::to_string(s.width));
    emit(out, {{"event", "dataset"}, {"id", to_string(id)}, {"root", cfg.out.string()},
               {"patients", patients.size()}, {"slices", slices}, {"sizes", sizes}});
  }
  return kExitOk;
}

int cmd_pretrain(const ExperimentConfig& cfg, std::ostream& out) {
  const TrainConfig tc = cfg.train_config();
  const auto samples = load(cfg, DatasetId::promise_like);
  const auto data = prepare_pretraining_data(samples, tc.preproc, [&](const std::string& w) {
    emit(out, {{"event", "warning"}, {"message", w}});
  });
  if (data.empty()) throw DataError("pre-training data has no slices with a prostate");
  emit(out, {{"event", "config"}, {"command", "pretrain"}, {"train", train_json(tc)},
             {"slices", data.size()}});
  Trainer trainer(tc);
  while (trainer.epoch() < tc.epochs()) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochStats s = trainer.train_epoch(data, TargetZone::wg);
    emit(out, epoch_json(s, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()));
  }
  const fs::path path = cfg.out / ("pretrain_" + to_string(tc.architecture) + ".ckpt");
  fs::create_directories(cfg.out);
  save_checkpoint(trainer.checkpoint(), path);
  emit(out, {{"event", "checkpoint"}, {"path", path.string()}, {"epochs", trainer.epoch()}});
  return kExitOk;
}

std::string slice_csv(const std::vector<SliceScore>& scores) {
  std::ostringstream s;
  s << "fold,test_dataset,patient,slice,dsc_cg,dsc_pz\n" << std::fixed << std::setprecision(4);
  for (const auto& r : scores) {
    s << r.fold << ',' << r.test_dataset << ',' << r.patient_id << ',' << r.slice_index << ','
      << r.cg << ',' << r.pz << '\n';
  }
  return s.str();
}

int cmd_crossval(const ExperimentConfig& cfg, std::ostream& out) {
  CrossValConfig cv;
  cv.train = cfg.train_config();
  cv.regime = cfg.regime;
  if (cfg.pretrained) {
    cv.pretrained = load_checkpoint(*cfg.pretrained);
    // Fail before any training if the weights do not fit.
    Trainer probe(cv.train);
    probe.load_weights(*cv.pretrained);
  }
  const auto d1 = load(cfg, DatasetId::d1);
  const auto d2 = load(cfg, DatasetId::d2);

  const json effective{{"train", train_json(cv.train)},
                       {"regime", to_string(cv.regime)},
                       {"pretrained", cfg.pretrained ? cfg.pretrained->string() : ""}};
  emit(out, {{"event", "config"}, {"command", "crossval"}, {"effective", effective}});

  cv.checkpoint_dir = cfg.out / "checkpoints";
  cv.overlay_dir = cfg.out / "overlays";
  if (!cfg.resume) fs::remove_all(cv.checkpoint_dir);
  const fs::path stamp = cv.checkpoint_dir / "config.json";
  if (fs::exists(stamp) && read_text(stamp) != effective.dump(2) + "\n") {
    throw ConfigError("checkpoints in " + cv.checkpoint_dir.string() +
                      " come from a different configuration; pass --resume false or a new --out");
  }
  write_text(stamp, effective.dump(2) + "\n");

  const auto t0 = std::chrono::steady_clock::now();
  const CrossValResult result = run_cross_validation(d1, d2, cv, [&](const FoldProgress& p) {
    json j = epoch_json(p.stats, p.seconds);
    j["fold"] = p.fold;
    if (p.resumed) j = {{"event", "resumed"}, {"fold", p.fold}, {"epochs_done", p.stats.epoch + 1}};
    emit(out, j);
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_metrics(result.rows(), cfg.out / "metrics.csv");
  write_text(cfg.out / "slices.csv", slice_csv(result.slices));
  const json summary{{"zonal_violations", result.zonal_violations},
                     {"evaluated_slices", result.slices.size()},
                     {"arch", to_string(cv.train.architecture)},
                     {"regime", to_string(cv.regime)}};
  write_text(cfg.out / "summary.json", summary.dump(2) + "\n");
  for (const auto& r : result.summary) {
    emit(out, {{"event", "result"}, {"test_dataset", r.test_dataset}, {"zone", r.zone},
               {"dsc_mean", r.dsc_mean}, {"dsc_std", r.dsc_std}});
  }
  emit(out, {{"event", "done"}, {"metrics", (cfg.out / "metrics.csv").string()},
             {"zonal_violations", result.zonal_violations}, {"seconds", seconds}});
  if (result.zonal_violations != 0) {
    throw InvariantError(std::to_string(result.zonal_violations) + " zonal constraint violations");
  }
  return kExitOk;
}

struct Evaluated {
  std::vector<SliceSample> views;
  std::vector<ZonalMask> zones;
};

Evaluated evaluate_slices(Trainer& trainer, const std::vector<SliceSample>& slices) {
  Evaluated e;
  for (const auto& s : slices) e.views.push_back(eval_view(harmonize(s, trainer.config().preproc.target_size),
                                                           trainer.config().preproc));
  const auto logits = trainer.predict(e.views, TargetZone::cg);
  for (std::size_t i = 0; i < logits.size(); ++i) e.zones.push_back(postprocess(logits[i], e.views[i].wg));
  return e;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(require_checkpoint(cfg));
  const DatasetId id = require_test_dataset(cfg);
  Trainer trainer(config_for_checkpoint(cfg, ckpt));
  trainer.load_weights(ckpt);
  const auto patients = load(cfg, id);
  std::vector<SliceSample> slices;
  for (const auto& p : patients) {
    for (const auto& s : p.slices) {
      if (count(s.wg) > 0) slices.push_back(s);
    }
  }
  const Evaluated e = evaluate_slices(trainer, slices);
  std::vector<SliceScore> scores;
  std::vector<double> cg;
  std::vector<double> pz;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < e.views.size(); ++i) {
    const auto& v = e.views[i];
    violations += zonal_violations(e.zones[i]);
    cg.push_back(dsc_metric(e.zones[i].cg, v.cg));
    pz.push_back(dsc_metric(e.zones[i].pz, v.pz));
    scores.push_back({0, to_string(id), v.patient_id, v.slice_index, cg.back(), pz.back()});
  }
  const fs::path path = cfg.out / ("evaluate_" + to_string(id) + ".csv");
  write_text(path, slice_csv(scores));
  const MeanStd mc = mean_std(cg);
  const MeanStd mp = mean_std(pz);
  emit(out, {{"event", "evaluation"}, {"dataset", to_string(id)}, {"slices", scores.size()},
             {"cg_mean", mc.mean}, {"cg_std", mc.std}, {"pz_mean", mp.mean}, {"pz_std", mp.std},
             {"zonal_violations", violations}, {"csv", path.string()}});
  return kExitOk;
}

int cmd_render_overlay(const ExperimentConfig& cfg, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(require_checkpoint(cfg));
  const DatasetId id = require_test_dataset(cfg);
  if (!cfg.patient || !cfg.slice) throw ConfigError("--patient and --slice are required");
  Trainer trainer(config_for_checkpoint(cfg, ckpt));
  trainer.load_weights(ckpt);
  const auto patients = load(cfg, id);
  const SliceSample* found = nullptr;
  for (const auto& p : patients) {
    for (const auto& s : p.slices) {
      if (p.patient_id == *cfg.patient && s.slice_index == *cfg.slice) found = &s;
    }
  }
  if (found == nullptr) {
    throw DataError(to_string(id) + " has no patient " + std::to_string(*cfg.patient) + " slice " +
                    std::to_string(*cfg.slice));
  }
  const Evaluated e = evaluate_slices(trainer, {*found});
  const SliceSample& v = e.views[0];
  char name[64];
  std::snprintf(name, sizeof name, "overlay_%s_p%03d_s%03d.png", to_string(id).c_str(), *cfg.patient,
                *cfg.slice);
  const fs::path path = cfg.out.extension() == ".png" ? cfg.out : cfg.out / name;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_overlay(v.image, e.zones[0], ZonalMask{v.wg, v.cg, v.pz}, path);
  emit(out, {{"event", "overlay"}, {"path", path.string()}, {"dsc_cg", dsc_metric(e.zones[0].cg, v.cg)},
             {"dsc_pz", dsc_metric(e.zones[0].pz, v.pz)}});
  return kExitOk;
}

int cmd_report(const ExperimentConfig& cfg, const std::vector<std::string>& inputs, std::ostream& out) {
  if (inputs.empty()) throw ConfigError("report needs at least one metrics CSV");
  using Key = std::tuple<std::string, bool, std::string, std::string, std::string, std::string>;
  std::map<Key, MetricsRow> merged;
  std::vector<MetricsRow> rows;
  for (const auto& in : inputs) {
    for (const auto& r : read_metrics(in)) {
      const Key key{r.arch, r.pretrained, r.train_regime, r.test_dataset, r.zone, r.fold};
      const auto [it, fresh] = merged.emplace(key, r);
      if (fresh) {
        rows.push_back(r);
      } else if (!(it->second == r)) {
        throw DataError("conflicting rows for " + r.arch + (r.pretrained ? " pretrained " : " scratch ") +
                        r.train_regime + "/" + r.test_dataset + "/" + r.zone + " fold " + r.fold +
                        " (" + in + ")");
      }
    }
  }
  // Groups that arrive without a summary row get one from their folds.
  std::vector<MetricsRow> summary;
  std::set<std::tuple<std::string, bool, std::string, std::string, std::string>> summarized;
  for (const auto& r : rows) {
    if (r.fold == "all") {
      summary.push_back(r);
      summarized.insert({r.arch, r.pretrained, r.train_regime, r.test_dataset, r.zone});
    }
  }
  std::vector<MetricsRow> pending;
  for (const auto& r : rows) {
    if (r.fold != "all" && !summarized.count({r.arch, r.pretrained, r.train_regime, r.test_dataset, r.zone})) {
      pending.push_back(r);
    }
  }
  for (const auto& r : aggregate(pending)) summary.push_back(r);

  // Highest mean per (regime, test set, zone) column; ties are all flagged.
  using Column = std::tuple<std::string, std::string, std::string>;
  std::map<Column, double> best;
  for (const auto& r : summary) {
    const Column c{r.train_regime, r.test_dataset, r.zone};
    const double v = std::round(r.dsc_mean * 1e4) / 1e4;  // compare as printed
    if (!best.count(c) || v > best[c]) best[c] = v;
  }
  auto is_best = [&](const MetricsRow& r) {
    return std::round(r.dsc_mean * 1e4) / 1e4 == best[{r.train_regime, r.test_dataset, r.zone}];
  };

  std::istringstream formatted(format_metrics(summary));
  std::ostringstream csv;
  std::string line;
  std::getline(formatted, line);
  csv << line << ",best\n";
  for (const auto& r : summary) {
    std::getline(formatted, line);
    csv << line << ',' << (is_best(r) ? 1 : 0) << '\n';
  }
  write_text(cfg.out / "report.csv", csv.str());

  // Table layout: one line per (arch, pretrained), one column per (regime, test, zone).
  std::vector<Column> columns;
  std::vector<std::pair<std::string, bool>> lines;
  for (const auto& r : summary) {
    const Column c{r.train_regime, r.test_dataset, r.zone};
    if (std::find(columns.begin(), columns.end(), c) == columns.end()) columns.push_back(c);
    const std::pair<std::string, bool> l{r.arch, r.pretrained};
    if (std::find(lines.begin(), lines.end(), l) == lines.end()) lines.push_back(l);
  }
  std::ostringstream table;
  table << std::left << std::setw(20) << "network";
  for (const auto& [regime, test, zone] : columns) {
    table << std::setw(16) << (regime + ">" + test + " " + zone);
  }
  table << '\n';
  for (const auto& [arch, pre] : lines) {
    table << std::setw(20) << (arch + (pre ? " (pretrained)" : ""));
    for (const auto& col : columns) {
      std::string cell = "-";
      for (const auto& r : summary) {
        if (r.arch == arch && r.pretrained == pre && Column{r.train_regime, r.test_dataset, r.zone} == col) {
          std::ostringstream c;
          c << std::fixed << std::setprecision(2) << r.dsc_mean << "+-" << r.dsc_std
            << (is_best(r) ? "*" : "");
          cell = c.str();
        }
      }
      table << std::setw(16) << cell;
    }
    table << '\n';
  }
  write_text(cfg.out / "report.txt", table.str());
  out << table.str();
  emit(out, {{"event", "report"}, {"rows", summary.size()}, {"csv", (cfg.out / "report.csv").string()}});
  return kExitOk;
}

// Flag -> setting key. Named flags override `--set` entries, which override the file.
struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

// Each flag overrides the setting of the same key.
const std::vector<Flag> kFlags{
    {"--arch", "arch", "segnet | unet | pix2pix"},
    {"--regime", "regime", "training data: d1 | d2 | mixed"},
    {"--pretrained", "pretrained", "checkpoint whose weights initialize training"},
    {"--seed", "seed", "base seed for every random stream"},
    {"--profile", "profile", "desk | full"},
    {"--out", "out", "output directory"},
    {"--data", "data", "phantom or dataset root"},
    {"--checkpoint", "checkpoint", "network checkpoint to evaluate or render"},
    {"--dataset", "dataset", "d1 | d2 | promise_like"},
    {"--patient", "patient", "patient id (1-based)"},
    {"--slice", "slice", "slice id (1-based)"},
    {"--patients", "patients", "patients per generated dataset"},
    {"--slices", "slices", "slices per generated patient"},
    {"--divisor", "divisor", "matrix size divisor for generated data"},
    {"--epochs", "epochs", "training epochs"},
    {"--resume", "resume", "true | false: continue from fold checkpoints"}};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zonal prostate segmentation: phantoms, training, cross-validation and reports", "zseg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "zseg 1.0");

  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> inputs;
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> given;

  const std::vector<std::pair<std::string, std::string>> verbs{
      {"generate-phantoms", "write d1-like, d2-like and pre-training phantom trees under --out"},
      {"pretrain", "train whole-gland segmentation on the pre-training set"},
      {"crossval", "4-fold cross-validation of one architecture and regime"},
      {"evaluate", "score a saved network on every slice of one dataset"},
      {"report", "merge metrics CSVs into one table with per-column maxima"},
      {"render-overlay", "draw predicted and gold contours for one slice"}};
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key = value settings file");
    sub->add_option("--set", sets, "extra setting as key=value (repeatable)");
    for (const Flag& f : kFlags) given.emplace_back(sub->add_option(f.name, values[f.key], f.help), f.key);
    if (name == "report") sub->add_option("inputs", inputs, "metrics CSV files");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }
  const std::string verb = app.get_subcommands().front()->get_name();

  try {
    Settings settings = config_path.empty() ? Settings{} : read_settings(config_path);
    for (const auto& s : sets) {
      const Settings one = parse_settings(s, "--set");
      for (const auto& [k, v] : one) settings[k] = v;
    }
    for (const auto& [opt, key] : given) {
      if (opt->count() > 0) settings[key] = values[key];
    }
    const ExperimentConfig cfg = make_experiment_config(settings);
    if (verb == "generate-phantoms") return cmd_generate_phantoms(cfg, out);
    if (verb == "pretrain") return cmd_pretrain(cfg, out);
    if (verb == "crossval") return cmd_crossval(cfg, out);
    if (verb == "evaluate") return cmd_evaluate(cfg, out);
    if (verb == "render-overlay") return cmd_render_overlay(cfg, out);
    return cmd_report(cfg, inputs, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace zseg
