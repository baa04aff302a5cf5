// Acceptance run: one PASS/FAIL line per primary criterion. The phantom
// criteria drive the real CLI at the desk profile.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphology_oracle.hpp"
#include "zseg/cli.hpp"
#include "zseg/crossval.hpp"
#include "zseg/errors.hpp"
#include "zseg/grad_check.hpp"

using namespace zseg;
namespace fs = std::filesystem;

namespace {

int failures = 0;
std::ofstream transcript;  // copy of the result lines in the work directory

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  transcript << '[' << (ok ? "PASS" : "FAIL") << "] " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Runs `body`, turning an exception into a FAIL line.
void criterion(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(false, name, std::string("exception: ") + e.what());
  }
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

Tensor64 random64(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor64 t(s);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}
Var64 leaf(Shape s, std::uint64_t seed) { return Var64(random64(s, seed), true); }

Mask random_mask(Rng& rng, int h, int w, double p) {
  Mask m(h, w);
  for (auto& v : m.data()) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------- gradients

double operator_max_error() {
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  double worst = 0.0;
  auto check = [&](const std::function<Var64()>& f, std::vector<NamedLeaf<double>> leaves) {
    worst = std::max(worst, grad_check<double>(f, std::move(leaves), opt).max_relative_error());
  };
  {
    Var64 x = leaf({2, 3, 6, 6}, 1), w = leaf({4, 3, 3, 3}, 2), b = leaf({1, 4, 1, 1}, 3);
    check([&] { return conv2d(x, w, b, 1, 1); }, {{"x", x}, {"w", w}, {"b", b}});
  }
  {
    Var64 x = leaf({1, 2, 8, 8}, 4), w = leaf({3, 2, 4, 4}, 5);
    check([&] { return conv2d(x, w, Var64(), 2, 1); }, {{"x", x}, {"w", w}});
  }
  {
    Var64 x = leaf({2, 3, 4, 4}, 6), w = leaf({3, 2, 2, 2}, 7), b = leaf({1, 2, 1, 1}, 8);
    check([&] { return conv_transpose2d(x, w, b, 2, 0); }, {{"x", x}, {"w", w}, {"b", b}});
  }
  {
    Var64 x = leaf({1, 2, 4, 4}, 9), w = leaf({2, 3, 4, 4}, 10);
    check([&] { return conv_transpose2d(x, w, Var64(), 2, 1); }, {{"x", x}, {"w", w}});
  }
  {
    Var64 x = leaf({2, 2, 6, 6}, 11);
    check(
        [&] {
          auto r = max_pool_2x2(x);
          return max_unpool_2x2(activation(r.output, Activation::tanh()), r.indices);
        },
        {{"x", x}});
  }
  {
    Var64 a = leaf({2, 2, 3, 3}, 12), b = leaf({2, 1, 3, 3}, 13);
    check([&] { return mul(concat_channels(a, b), concat_channels(b, a)); }, {{"a", a}, {"b", b}});
  }
  for (Activation act : {Activation::relu(), Activation::leaky_relu(0.2f), Activation::sigmoid(),
                         Activation::tanh()}) {
    Var64 x = leaf({2, 2, 4, 4}, 14);
    check([&] { return activation(x, act); }, {{"x", x}});
  }
  for (Mode mode : {Mode::train, Mode::eval}) {
    Var64 x = leaf({2, 3, 4, 4}, 15), g = Var64(random64({1, 3, 1, 1}, 16, 0.5, 1.5), true),
          b = leaf({1, 3, 1, 1}, 17);
    Tensor64 rm = random64({1, 3, 1, 1}, 18, -0.1, 0.1);
    Tensor64 rv = random64({1, 3, 1, 1}, 19, 0.5, 1.5);
    check([&] { return batch_norm(x, g, b, rm, rv, mode); }, {{"x", x}, {"gamma", g}, {"beta", b}});
  }
  {
    Var64 x = leaf({2, 1, 4, 4}, 20);
    Tensor64 target({2, 1, 4, 4});
    for (std::size_t i = 0; i < target.numel(); i += 3) target[i] = 1.0;
    check([&] { return dsc_loss(x, target); }, {{"logits", x}});
    check([&] { return bce_with_logits(x, 1.0); }, {{"logits", x}});
  }
  return worst;
}

double full_net_max_error() {
  GradCheckOptions opt;
  opt.tolerance = 1e-3;
  opt.max_coordinates = 24;
  double worst = 0.0;
  auto run = [&](BasicModel<double>& m, const Var64& in) {
    std::vector<NamedLeaf<double>> leaves{{"input", in}};
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      leaves.push_back({m.parameters()[i].name, m.parameters()[i].value});
    }
    const auto rep = grad_check<double>([&] { return m.forward(in, Mode::train); }, leaves, opt);
    worst = std::max(worst, rep.max_relative_error());
  };
  const Var64 x = leaf({1, 1, 16, 16}, 21);
  run(*build_unet<double>(2, 31, 2), x);
  run(*build_segnet<double>(2, 32, 3), x);
  auto p = build_pix2pix<double>(2, 33, 4, 3);
  run(*p.generator, x);
  run(*p.discriminator, leaf({1, 2, 16, 16}, 22));
  return worst;
}

// ---------------------------------------------------------------- CLI runs

struct CliRun {
  int code = 0;
  double cpu = 0.0;
  double wall = 0.0;
  std::string log;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const double c0 = cpu_seconds();
  const auto t0 = std::chrono::steady_clock::now();
  CliRun r;
  r.code = run_cli(args, out, err);
  r.cpu = cpu_seconds() - c0;
  r.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.log = out.str();
  r.err = err.str();
  if (r.code != 0) std::fprintf(stderr, "zseg %s failed (%d): %s\n", args[0].c_str(), r.code, r.err.c_str());
  return r;
}

std::map<std::string, double> summary_means(const fs::path& csv) {
  std::map<std::string, double> out;
  for (const auto& r : read_metrics(csv)) {
    if (r.fold == "all") out[r.test_dataset + "/" + r.zone] = r.dsc_mean;
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "zseg_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  transcript.open(work / "acceptance.txt");
  const std::string data = (work / "data").string();
  const std::string seed = "2024";
  std::size_t zonal_outputs = 0;
  std::size_t zonal_bad = 0;

  criterion("gradient correctness", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const double ops = operator_max_error();
    const double nets = full_net_max_error();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(ops < 1e-4 && nets < 1e-3 && secs < 120.0, "gradient correctness",
           "operators max rel err " + fmt("%.2e", ops) + " (< 1e-4), full nets at 16x16 width 2 " +
               fmt("%.2e", nets) + " (< 1e-3), " + fmt("%.1f", secs) + " s (< 120 s)");
  });

  criterion("loss identities", [&] {
    const Tensor ones({1, 1, 2, 2}, 1.0f);
    const double perfect = dsc_loss_from_probabilities(Var(ones, false), ones).value()[0];
    const double none = dsc_loss_from_probabilities(Var(Tensor({1, 1, 2, 2}), false), ones).value()[0];
    const Tensor s({1, 1, 1, 4}, std::vector<float>{1, 1, 0, 0});
    const Tensor r({1, 1, 1, 4}, std::vector<float>{1, 0, 0, 0});
    const double hand = dsc_loss_from_probabilities(Var(s, false), r).value()[0];
    const double hand_err = std::max({std::abs(perfect + 1.0), std::abs(none), std::abs(hand + 2.0 / 3.0)});
    Rng rng(77);
    double consistency = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Mask a = random_mask(rng, 32, 32, rng.uniform(0.0, 0.6));
      const Mask b = random_mask(rng, 32, 32, rng.uniform(0.0, 0.6));
      Tensor pa({1, 1, 32, 32});
      Tensor pb({1, 1, 32, 32});
      for (std::size_t k = 0; k < a.size(); ++k) {
        pa[k] = a[k];
        pb[k] = b[k];
      }
      const double loss = dsc_loss_from_probabilities(Var(pa, false), pb).value()[0];
      if (count(a) + count(b) > 0) consistency = std::max(consistency, std::abs(dsc_metric(a, b) + 100.0 * loss));
    }
    report(hand_err < 1e-6 && consistency < 1e-4, "loss identities",
           "hand cases (-1, 0, -0.6667) max deviation " + fmt("%.2e", hand_err) +
               " (< 1e-6); |dsc_metric + 100 dsc_loss| on 200 binary pairs " + fmt("%.2e", consistency) +
               " (< 1e-4)");
  });

  criterion("morphology oracle equivalence", [&] {
    Rng rng(99);
    int fill_bad = 0;
    int comp_bad = 0;
    for (int i = 0; i < 1000; ++i) {
      const Mask m = random_mask(rng, 16, 16, 0.15 + 0.6 * (i % 7) / 6.0);
      const Mask wg = random_mask(rng, 16, 16, rng.uniform(0.2, 1.0));
      fill_bad += fill_holes(m) == oracle::fill_holes(m) ? 0 : 1;
      comp_bad += remove_small_components(m, wg) == oracle::remove_small_components(m, wg) ? 0 : 1;
      Image logits(16, 16);
      for (auto& v : logits.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      zonal_bad += zonal_violations(postprocess(logits, wg)) > 0 ? 1 : 0;
      ++zonal_outputs;
    }
    const Mask wg3(3, 3, 1);
    const Mask wg_big(5, 5, 1);  // threshold 3
    for (int bits = 0; bits < 512; ++bits) {
      Mask m(3, 3);
      for (int k = 0; k < 9; ++k) m[k] = (bits >> k) & 1;
      fill_bad += fill_holes(m) == oracle::fill_holes(m) ? 0 : 1;
      Mask wg(3, 3);
      for (int k = 0; k < 9; ++k) wg[k] = ((bits * 5 + 1) >> (k % 6)) & 1;
      for (const Mask* g : {&wg3, static_cast<const Mask*>(&wg)}) {
        comp_bad += remove_small_components(m, *g) == oracle::remove_small_components(m, *g) ? 0 : 1;
      }
      Mask padded(5, 5);
      for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 3; ++x) padded.at(y + 1, x + 1) = m.at(y, x);
      }
      comp_bad += remove_small_components(padded, wg_big) == oracle::remove_small_components(padded, wg_big) ? 0 : 1;
    }
    report(fill_bad == 0 && comp_bad == 0, "morphology oracle equivalence",
           "1000 random 16x16 and all 512 3x3 masks: fill_holes mismatches " + std::to_string(fill_bad) +
               ", remove_small_components mismatches " + std::to_string(comp_bad));
  });

  criterion("fold exactness", [&] {
    auto range = [](int a, int b) {
      std::vector<int> v;
      for (int i = a; i <= b; ++i) v.push_back(i);
      return v;
    };
    const bool d1 = make_folds(21).groups ==
                    std::vector<std::vector<int>>{range(1, 5), range(6, 10), range(11, 15), range(16, 21)};
    const bool d2 = make_folds(19).groups ==
                    std::vector<std::vector<int>>{range(1, 5), range(6, 10), range(11, 15), range(16, 19)};
    report(d1 && d2, "fold exactness",
           std::string("21 patients {1-5,6-10,11-15,16-21} ") + (d1 ? "match" : "differ") +
               ", 19 patients {1-5,6-10,11-15,16-19} " + (d2 ? "match" : "differ"));
  });

  criterion("hyperparameter defaults", [&] {
    std::vector<std::string> bad;
    auto expect = [&](bool ok, const std::string& what) {
      if (!ok) bad.push_back(what);
    };
    for (Architecture a : {Architecture::segnet, Architecture::unet}) {
      const OptimizerConfig c = default_optimizer(a);
      const std::string n = to_string(a);
      expect(c.kind == OptimizerKind::sgd_momentum, n + " kind");
      expect(c.lr == 0.01 && c.momentum == 0.9 && c.weight_decay == 5e-4, n + " lr/momentum/wd");
      expect(c.batch_size == (a == Architecture::segnet ? 8 : 4), n + " batch");
      expect(c.epochs == 50, n + " epochs");
      expect(apply_lr_schedule(c, 19) == 0.01, n + " lr@19");
      expect(apply_lr_schedule(c, 20) == 0.002, n + " lr@20");
      expect(apply_lr_schedule(c, 39) == 0.002, n + " lr@39");
      expect(apply_lr_schedule(c, 40) == 0.0004, n + " lr@40");
    }
    const OptimizerConfig g = default_optimizer(Architecture::pix2pix, NetworkRole::segmenter);
    const OptimizerConfig d = default_optimizer(Architecture::pix2pix, NetworkRole::discriminator);
    expect(g.kind == OptimizerKind::adam && d.kind == OptimizerKind::adam, "pix2pix adam");
    expect(g.lr == 0.01 && d.lr == 0.0002, "pix2pix lrs");
    expect(g.beta1 == 0.9 && g.beta2 == 0.999 && g.epsilon == 1e-8, "adam betas");
    expect(g.batch_size == 12 && d.batch_size == 12 && g.epochs == 50, "pix2pix batch/epochs");
    expect(apply_lr_schedule(g, 20) == 0.001 && apply_lr_schedule(g, 40) == 0.0001, "generator x0.1 per 20");
    expect(d.schedule.empty(), "discriminator schedule");
    std::string detail = "SGD 0.01/0.9/5e-4, batch 8 (SegNet) and 4 (U-Net), 50 epochs, lr 0.002 at epoch 20 and "
                         "0.0004 at 40; pix2pix Adam 2e-4/1e-2, batch 12, generator x0.1 every 20";
    for (const auto& b : bad) detail += "; mismatch: " + b;
    report(bad.empty(), "hyperparameter defaults", detail);
  });

  // Phantom runs through the CLI at the desk profile.
  const CliRun gen = cli({"generate-phantoms", "--profile", "desk", "--seed", seed, "--out", data});
  auto crossval = [&](const std::string& arch, const std::string& regime, const std::string& out) {
    CliRun r = cli({"crossval", "--profile", "desk", "--seed", seed, "--arch", arch, "--regime", regime,
                    "--data", data, "--out", (work / out).string()});
    if (r.code == 0) {
      const auto summary = nlohmann::json::parse(slurp(work / out / "summary.json"));
      zonal_outputs += summary["evaluated_slices"].get<std::size_t>();
      zonal_bad += summary["zonal_violations"].get<std::size_t>();
    }
    return r;
  };

  std::map<std::string, CliRun> runs;
  criterion("phantom end-to-end", [&] {
    if (gen.code != 0) throw DataError("phantom generation failed: " + gen.err);
    std::string detail;
    bool ok = true;
    const std::map<std::string, std::pair<double, double>> floors{
        {"unet", {85.0, 80.0}}, {"segnet", {75.0, 75.0}}, {"pix2pix", {75.0, 75.0}}};
    for (const std::string arch : {"unet", "segnet", "pix2pix"}) {
      const CliRun r = crossval(arch, "mixed", arch + "_mixed");
      runs[arch] = r;
      if (r.code != 0) {
        ok = false;
        detail += arch + " exit " + std::to_string(r.code) + "; ";
        continue;
      }
      const auto m = summary_means(work / (arch + "_mixed") / "metrics.csv");
      const double cg = (m.at("d1/cg") + m.at("d2/cg")) / 2.0;
      const double pz = (m.at("d1/pz") + m.at("d2/pz")) / 2.0;
      const auto [cg_floor, pz_floor] = floors.at(arch);
      const bool pass = cg >= cg_floor && pz >= pz_floor && r.cpu < 600.0;
      ok = ok && pass;
      detail += arch + " CG " + fmt("%.2f", cg) + " (>= " + fmt("%.0f", cg_floor) + ") PZ " + fmt("%.2f", pz) +
                " (>= " + fmt("%.0f", pz_floor) + ") " + fmt("%.0f", r.cpu) + " s CPU; ";
    }
    report(ok, "phantom end-to-end", detail + "held-out folds, mixed regime, 5 epochs, limit 600 s CPU each");
  });

  criterion("cross-dataset structure", [&] {
    const CliRun r = crossval("unet", "d1", "unet_d1");
    if (r.code != 0 || runs["unet"].code != 0) throw DataError("U-Net run failed");
    const auto single = summary_means(work / "unet_d1" / "metrics.csv");
    const auto mixed = summary_means(work / "unet_mixed" / "metrics.csv");
    const double s = (single.at("d2/cg") + single.at("d2/pz")) / 2.0;
    const double m = (mixed.at("d2/cg") + mixed.at("d2/pz")) / 2.0;
    report(s < m, "cross-dataset structure",
           "U-Net on d2-like test data: d1-only training " + fmt("%.2f", s) + " (CG " + fmt("%.2f", single.at("d2/cg")) +
               ", PZ " + fmt("%.2f", single.at("d2/pz")) + ") vs mixed " + fmt("%.2f", m) + " (CG " +
               fmt("%.2f", mixed.at("d2/cg")) + ", PZ " + fmt("%.2f", mixed.at("d2/pz")) + ")");
  });

  criterion("determinism", [&] {
    // Fresh second invocation, then a resumed third one into the first directory.
    const CliRun again = crossval("pix2pix", "mixed", "pix2pix_again");
    const CliRun resumed = crossval("pix2pix", "mixed", "pix2pix_mixed");
    if (again.code != 0 || resumed.code != 0 || runs["pix2pix"].code != 0) throw DataError("pix2pix rerun failed");
    const std::string first = slurp(work / "pix2pix_mixed" / "metrics.csv");
    const bool same_csv = first == slurp(work / "pix2pix_again" / "metrics.csv");
    const bool same_resumed = first == slurp(work / "pix2pix_mixed" / "metrics.csv") &&
                              resumed.log.find("\"resumed\"") != std::string::npos;

    // Checkpoint bytes survive load/save, and resuming mid-run matches an uninterrupted run.
    const fs::path ckpt = work / "unet_mixed" / "checkpoints" / "fold_2.ckpt";
    const Checkpoint loaded = load_checkpoint(ckpt);
    save_checkpoint(loaded, work / "resaved.ckpt");
    const bool bit_exact = slurp(ckpt) == slurp(work / "resaved.ckpt");

    TrainConfig tc = desk_train_config(Architecture::unet, 5);
    tc.optimizer.epochs = 3;
    const auto patients = load_dataset(data, DatasetDescriptor{DatasetId::d1, {}, 0, 0, {}, 0, 0});
    const auto slices = usable_slices(patients, {1, 2, 3}, tc.preproc.target_size);
    Trainer straight(tc);
    for (int e = 0; e < 3; ++e) straight.train_epoch(slices, TargetZone::cg);
    Trainer first_half(tc);
    first_half.train_epoch(slices, TargetZone::cg);
    save_checkpoint(first_half.checkpoint(), work / "half.ckpt");
    Trainer second_half(tc);
    second_half.resume(load_checkpoint(work / "half.ckpt"));
    while (second_half.epoch() < 3) second_half.train_epoch(slices, TargetZone::cg);
    const bool resume_equal = serialize(second_half.checkpoint()) == serialize(straight.checkpoint());

    report(same_csv && same_resumed && bit_exact && resume_equal, "determinism",
           std::string("repeat crossval CSV ") + (same_csv ? "byte-identical" : "differs") + ", resumed crossval CSV " +
               (same_resumed ? "byte-identical" : "differs") + ", checkpoint load/save " +
               (bit_exact ? "bit-exact" : "differs") + ", resume after epoch 1 of 3 " +
               (resume_equal ? "matches uninterrupted training" : "diverges"));
  });

  // Every pipeline output seen above: random post-processing inputs and all crossval test slices.
  report(zonal_bad == 0 && zonal_outputs > 1000, "zonal constraints",
         std::to_string(zonal_bad) + " violations of wg == cg | pz, cg & pz == 0 over " +
             std::to_string(zonal_outputs) + " pipeline outputs");

  std::printf("%d criteria failed\n", failures);
  transcript << failures << " criteria failed" << std::endl;
  return failures == 0 ? 0 : 1;
}
