#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "zseg/cli.hpp"
#include "zseg/errors.hpp"
#include "zseg/experiment.hpp"

using namespace zseg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<nlohmann::json> records(const std::string& text, const std::string& event) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '{') continue;
    auto j = nlohmann::json::parse(line);
    if (j["event"] == event) out.push_back(j);
  }
  return out;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("zseg_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("settings files") {
  const Settings s = parse_settings("# experiment\narch = segnet\n\nseed=4  # trailing\n");
  CHECK(s.at("arch") == "segnet");
  CHECK(s.at("seed") == "4");
  CHECK_THROWS_AS(parse_settings("arch segnet"), ConfigError);
  CHECK_THROWS_AS(parse_settings("seed = 1\nseed = 2"), ConfigError);
  CHECK_THROWS_AS(make_experiment_config({{"learning_rate", "1"}}), ConfigError);
  CHECK_THROWS_AS(make_experiment_config({{"epochs", "two"}}), ConfigError);
  CHECK_THROWS_AS(make_experiment_config({{"epochs", "0"}}), ConfigError);
  CHECK_THROWS_AS(make_experiment_config({}).train_config(), ConfigError);

  const ExperimentConfig c = make_experiment_config(
      {{"arch", "pix2pix"}, {"seed", "3"}, {"profile", "desk"}, {"disc_lr", "0.001"}, {"epochs", "2"}});
  const TrainConfig t = c.train_config();
  CHECK(t.discriminator_optimizer.lr == 0.001);
  CHECK(t.optimizer.lr == 0.01);
  CHECK(t.epochs() == 2);
  CHECK(t.levels == 6);
}

TEST_CASE("phantom layouts per profile") {
  ExperimentConfig c;
  c.seed = 1;
  CHECK(c.phantom_layout(DatasetId::d1).patient_count == 21);
  CHECK(c.phantom_layout(DatasetId::d2).patient_count == 19);
  CHECK(c.phantom_layout(DatasetId::promise_like).patient_count == 50);
  CHECK(c.phantom_layout(DatasetId::d1).sizes[0] == MatrixSize{288, 288});
  c.profile = Profile::desk;
  CHECK(c.phantom_layout(DatasetId::d2).sizes[0] == MatrixSize{78, 96});
  CHECK(c.phantom_layout(DatasetId::d1).slices_per_patient == 12);
  c.patients = 4;
  CHECK(c.phantom_layout(DatasetId::promise_like).patient_count == 4);
  CHECK(c.phantom_layout(DatasetId::promise_like).slices_per_patient == 32);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"crossval", "--bogus"}).code == kExitConfig);
  CHECK(run({"crossval", "--arch", "resnet", "--seed", "1"}).code == kExitConfig);
  CHECK(run({"crossval", "--profile", "desk"}).code == kExitConfig);  // no seed
  CHECK(run({"crossval", "--config", "/nonexistent/zseg.cfg"}).code == kExitData);
  CHECK(run({"crossval", "--seed", "1", "--profile", "desk", "--data", "/nonexistent"}).code == kExitData);
  CHECK(run({"report", "--out", scratch("noinput").string()}).code == kExitConfig);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("generate, pretrain, evaluate and report") {
  const fs::path dir = scratch("flow");
  const std::string data = (dir / "data").string();
  const std::vector<std::string> gen{"generate-phantoms", "--profile", "desk", "--seed", "5",
                                     "--patients", "4", "--slices", "3", "--out", data};
  const Run g = run(gen);
  REQUIRE(g.code == kExitOk);
  const auto sets = records(g.out, "dataset");
  REQUIRE(sets.size() == 3);
  CHECK(sets[0]["patients"] == 4);
  const std::string before = slurp(dir / "data" / "d2" / "patient_003" / "slice_002_img.png");
  REQUIRE(run(gen).code == kExitOk);
  CHECK(slurp(dir / "data" / "d2" / "patient_003" / "slice_002_img.png") == before);

  // Config file with a flag overriding it.
  const fs::path cfg = dir / "pre.cfg";
  std::ofstream(cfg) << "profile = desk\nseed = 5\narch = unet\nepochs = 9\n";
  const Run p = run({"pretrain", "--config", cfg.string(), "--epochs", "3", "--data", data, "--out",
                     (dir / "pre").string()});
  REQUIRE(p.code == kExitOk);
  const auto epochs = records(p.out, "epoch");
  REQUIRE(epochs.size() == 3);
  CHECK(epochs.back()["loss"].get<double>() < epochs.front()["loss"].get<double>());
  const Checkpoint ckpt = load_checkpoint(dir / "pre" / "pretrain_unet.ckpt");
  CHECK(ckpt.architecture == "unet");
  CHECK(ckpt.epoch == 3);

  const Run e = run({"evaluate", "--profile", "desk", "--checkpoint", (dir / "pre" / "pretrain_unet.ckpt").string(),
                     "--dataset", "d1", "--data", data, "--out", (dir / "eval").string()});
  REQUIRE(e.code == kExitOk);
  const auto ev = records(e.out, "evaluation");
  REQUIRE(ev.size() == 1);
  CHECK(ev[0]["slices"] == 12);
  CHECK(ev[0]["zonal_violations"] == 0);
  CHECK(run({"evaluate", "--profile", "desk", "--checkpoint", (dir / "pre" / "pretrain_unet.ckpt").string(),
             "--dataset", "promise_like", "--data", data})
            .code == kExitConfig);

  const Run o = run({"render-overlay", "--profile", "desk", "--checkpoint",
                     (dir / "pre" / "pretrain_unet.ckpt").string(), "--dataset", "d2", "--patient", "2",
                     "--slice", "1", "--data", data, "--out", (dir / "o.png").string()});
  REQUIRE(o.code == kExitOk);
  CHECK(fs::exists(dir / "o.png"));

  // Report: max flags per column, conflicts rejected.
  std::ofstream(dir / "a.csv") << kMetricsHeader << "\n"
                               << "unet,false,mixed,d1,cg,all,90.0000,1.0000\n"
                               << "segnet,false,mixed,d1,cg,all,80.0000,2.0000\n"
                               << "segnet,true,mixed,d1,cg,all,90.0000,0.5000\n";
  std::ofstream(dir / "b.csv") << kMetricsHeader << "\n"
                               << "pix2pix,false,d1,d2,pz,1,70.0000,1.0000\n"
                               << "pix2pix,false,d1,d2,pz,2,72.0000,1.0000\n";
  const Run r = run({"report", (dir / "a.csv").string(), (dir / "b.csv").string(), "--out", (dir / "rep").string()});
  REQUIRE(r.code == kExitOk);
  const std::string report = slurp(dir / "rep" / "report.csv");
  CHECK(report.find("unet,false,mixed,d1,cg,all,90.0000,1.0000,1") != std::string::npos);
  CHECK(report.find("segnet,true,mixed,d1,cg,all,90.0000,0.5000,1") != std::string::npos);
  CHECK(report.find("segnet,false,mixed,d1,cg,all,80.0000,2.0000,0") != std::string::npos);
  CHECK(report.find("pix2pix,false,d1,d2,pz,all,71.0000,1.0000,1") != std::string::npos);
  std::ofstream(dir / "c.csv") << kMetricsHeader << "\n" << "unet,false,mixed,d1,cg,all,91.0000,1.0000\n";
  CHECK(run({"report", (dir / "a.csv").string(), (dir / "c.csv").string(), "--out", (dir / "rep").string()}).code ==
        kExitData);
  fs::remove_all(dir);
}
