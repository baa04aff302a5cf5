#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "doctest.h"
#include "test_util.hpp"
#include "zseg/checkpoint.hpp"
#include "zseg/dataset.hpp"
#include "zseg/metrics_io.hpp"
#include "zseg/models.hpp"
#include "zseg/phantom.hpp"
#include "zseg/png_io.hpp"

using namespace zseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("zseg_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double mean_over(const Image& img, const Mask& m) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (m[i]) {
      sum += img[i];
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

SliceSample tiny_slice(int patient, int index) {
  SliceSample s;
  s.patient_id = patient;
  s.slice_index = index;
  s.image = Image(4, 4);
  for (std::size_t i = 0; i < 16; ++i) s.image[i] = static_cast<float>(i) / 15.0f;
  s.wg = Mask(4, 4);
  s.cg = Mask(4, 4);
  s.wg.at(1, 1) = s.wg.at(1, 2) = s.wg.at(2, 1) = 1;
  s.cg.at(1, 1) = 1;
  s.pz = mask_and_not(s.wg, s.cg);
  return s;
}

}  // namespace

TEST_CASE("descriptors") {
  const auto d1 = d1_descriptor();
  CHECK(d1.matrix_sizes == std::vector<MatrixSize>{{288, 288}});
  CHECK(d1.slice_thickness_mm == 3.0);
  CHECK(d1.patient_count == 21);
  const auto d2 = d2_descriptor();
  CHECK(d2.matrix_sizes ==
        std::vector<MatrixSize>{{308, 384}, {336, 448}, {360, 448}, {368, 448}});
  CHECK(d2.patient_count == 19);
  d1.validate();
  d2.validate();
  const auto desk = scaled_descriptor(d2, 4);
  CHECK(desk.matrix_sizes == std::vector<MatrixSize>{{78, 96}, {84, 112}, {90, 112}, {92, 112}});
  CHECK(scaled_descriptor(d1, 4).matrix_sizes[0] == MatrixSize{72, 72});
  DatasetDescriptor broken = d1;
  broken.slice_thickness_mm = 0.0;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
}

TEST_CASE("normalization") {
  Image constant(3, 3, 7.0f);
  const Image z = normalize_min_max(constant);
  for (float v : z.data()) CHECK(v == 0.0f);
  Image ramp(1, 3, std::vector<float>{2.0f, 4.0f, 6.0f});
  const Image r = normalize_min_max(ramp);
  CHECK(r[0] == 0.0f);
  CHECK(r[1] == doctest::Approx(0.5));
  CHECK(r[2] == 1.0f);
}

TEST_CASE("png round trips") {
  TempDir dir("png");
  Grid<std::uint16_t> img(5, 7);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<std::uint16_t>(i * 1871 % 65536);
  write_png_gray16(dir.path / "a.png", img);
  CHECK(read_png_gray(dir.path / "a.png") == img);
  Mask m(3, 4);
  m.at(1, 2) = 1;
  write_png_mask(dir.path / "m.png", m);
  CHECK(read_png_mask(dir.path / "m.png") == m);
  CHECK(read_png_gray(dir.path / "m.png").at(1, 2) == 255);
  Grid<Rgb> rgb(2, 2, Rgb{1, 2, 3});
  write_png_rgb(dir.path / "c.png", rgb);
  CHECK(read_png_rgb(dir.path / "c.png") == rgb);
  CHECK_THROWS_AS(read_png_gray(dir.path / "c.png"), DataError);
  CHECK_THROWS_AS(read_png_gray(dir.path / "missing.png"), DataError);
  std::ofstream(dir.path / "junk.png") << "not a png";
  CHECK_THROWS_AS(read_png_gray(dir.path / "junk.png"), DataError);
}

TEST_CASE("dataset load and validation") {
  TempDir dir("ds");
  std::vector<PatientRecord> patients(2);
  for (int p = 0; p < 2; ++p) {
    patients[p].patient_id = p + 1;
    patients[p].slices = {tiny_slice(p + 1, 1), tiny_slice(p + 1, 2)};
  }
  write_dataset(dir.path, DatasetId::phantom, patients);
  DatasetDescriptor desc = d1_descriptor();
  desc.id = DatasetId::phantom;
  const auto loaded = load_dataset(dir.path, desc);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].patient_id == 1);
  CHECK(loaded[1].slices.size() == 2);
  CHECK(loaded[0].slices[0].wg == patients[0].slices[0].wg);
  CHECK(loaded[0].slices[0].pz == patients[0].slices[0].pz);
  CHECK(loaded[0].slices[0].image[15] == 1.0f);
  CHECK(loaded[0].slices[0].image[5] == doctest::Approx(5.0 / 15.0).epsilon(1e-4));

  SUBCASE("constant slice normalizes to zeros") {
    auto flat = patients;
    flat[0].slices[0].image = Image(4, 4, 0.5f);
    write_dataset(dir.path, DatasetId::phantom, flat);
    const auto again = load_dataset(dir.path, desc);
    for (float v : again[0].slices[0].image.data()) CHECK(v == 0.0f);
  }
  SUBCASE("missing mask names the slice") {
    fs::remove(patient_dir(dir.path, DatasetId::phantom, 2) / "slice_002_cg.png");
    try {
      load_dataset(dir.path, desc);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("patient 2 slice 2") != std::string::npos);
    }
  }
  SUBCASE("cg outside wg is rejected") {
    Mask bad(4, 4);
    bad.at(3, 3) = 1;
    bad.at(0, 0) = 1;
    write_png_mask(patient_dir(dir.path, DatasetId::phantom, 1) / "slice_001_cg.png", bad);
    try {
      load_dataset(dir.path, desc);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("2 CG pixels") != std::string::npos);
    }
  }
  SUBCASE("mask shape mismatch") {
    write_png_mask(patient_dir(dir.path, DatasetId::phantom, 1) / "slice_001_wg.png", Mask(3, 4));
    CHECK_THROWS_AS(load_dataset(dir.path, desc), DataError);
  }
}

TEST_CASE("phantom generator") {
  const PhantomConfig d1 = phantom_config(DatasetId::d1, 11, 3, 6, 4);
  const PhantomConfig d2 = phantom_config(DatasetId::d2, 11, 4, 6, 4);
  for (const auto& config : {d1, d2}) {
    const auto patients = generate_phantom_dataset(config);
    REQUIRE(patients.size() == static_cast<std::size_t>(config.patient_count));
    for (const auto& p : patients) {
      for (const auto& s : p.slices) {
        CHECK(is_subset(s.cg, s.wg));
        CHECK(count(s.cg) > 0);
        CHECK(count(s.pz) > 0);
        CHECK(s.pz == mask_and_not(s.wg, s.cg));
        // Hypo-intense CG.
        CHECK(mean_over(s.image, s.cg) < mean_over(s.image, s.pz));
      }
    }
  }
  // d2 patients cycle through the four matrix sizes.
  const auto p2 = generate_phantom_dataset(d2);
  CHECK(p2[1].slices[0].image.height() == 84);
  CHECK(p2[1].slices[0].image.width() == 112);

  SUBCASE("deterministic and seed dependent") {
    const auto a = generate_phantom_dataset(d1);
    const auto b = generate_phantom_dataset(d1);
    PhantomConfig other = d1;
    other.seed = 12;
    const auto c = generate_phantom_dataset(other);
    CHECK(a[0].slices[2].image == b[0].slices[2].image);
    CHECK_FALSE(a[0].slices[2].image == c[0].slices[2].image);
  }
  SUBCASE("files are bit-identical across runs") {
    TempDir x("ph1");
    TempDir y("ph2");
    write_dataset(x.path, DatasetId::d1, generate_phantom_dataset(d1));
    write_dataset(y.path, DatasetId::d1, generate_phantom_dataset(d1));
    const auto rel = fs::path("d1/patient_002/slice_003_img.png");
    CHECK(file_bytes(x.path / rel) == file_bytes(y.path / rel));
  }
  SUBCASE("promise-like samples have prostate-free end slices") {
    const auto pr = generate_phantom_dataset(phantom_config(DatasetId::promise_like, 3, 2, 30, 4));
    CHECK(pr[0].slices.size() == 30);
    CHECK(count(pr[0].slices.front().wg) == 0);
    CHECK(count(pr[0].slices.back().wg) == 0);
    CHECK(count(pr[0].slices[15].wg) > 0);
    CHECK(pr[0].slices[0].image.height() == 128);
  }
  SUBCASE("invalid sizes") {
    PhantomConfig odd = d1;
    odd.sizes = {{33, 64}};
    CHECK_THROWS_AS(generate_phantom_dataset(odd), ConfigError);
    odd.sizes = {{30, 30}};
    CHECK_THROWS_AS(generate_phantom_dataset(odd), ConfigError);
  }
}

TEST_CASE("checkpoint round trip") {
  auto model = build_unet<float>(2, 5, 2);
  auto& params = model->parameters();
  params[0].velocity.fill(0.25f);
  params.buffer(0).value.fill(-3.0f);
  Checkpoint c;
  c.architecture = "unet";
  c.base_width = 2;
  c.levels = 2;
  c.epoch = 3;
  Rng rng(9);
  rng.next();
  c.rng_state = rng.state();
  c.set_counter("steps", 42);
  capture(params, "", StateScope::training, c);

  TempDir dir("ckpt");
  save_checkpoint(c, dir.path / "a.zsg");
  const Checkpoint loaded = load_checkpoint(dir.path / "a.zsg");
  save_checkpoint(loaded, dir.path / "b.zsg");
  CHECK(file_bytes(dir.path / "a.zsg") == file_bytes(dir.path / "b.zsg"));
  CHECK(loaded.counter("steps") == 42);
  CHECK(loaded.epoch == 3);
  Rng resumed(0);
  resumed.restore(loaded.rng_state);
  CHECK(resumed.next() == rng.next());

  auto fresh = build_unet<float>(2, 77, 2);
  restore(fresh->parameters(), "", StateScope::training, loaded);
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(fresh->parameters()[i].value.value().data().size() == params[i].value.value().data().size());
    CHECK(std::equal(params[i].value.value().data().begin(), params[i].value.value().data().end(),
                     fresh->parameters()[i].value.value().data().begin()));
  }
  CHECK(fresh->parameters()[0].velocity[0] == 0.25f);
  CHECK(fresh->parameters().buffer(0).value[0] == -3.0f);

  SUBCASE("distinct faults") {
    auto bytes = serialize(c);
    auto fault_of = [](const std::vector<std::uint8_t>& b) {
      try {
        deserialize(b);
      } catch (const CheckpointError& e) {
        return e.fault();
      }
      FAIL("expected CheckpointError");
      return CheckpointFault::io;
    };
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    CHECK(fault_of(truncated) == CheckpointFault::truncated);
    auto wrong_version = bytes;
    wrong_version[4] = 9;
    CHECK(fault_of(wrong_version) == CheckpointFault::version);
    auto wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK(fault_of(wrong_magic) == CheckpointFault::bad_magic);

    auto other = build_unet<float>(2, 5, 3);  // one more level: extra names
    try {
      restore(other->parameters(), "", StateScope::weights, loaded);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.fault() == CheckpointFault::names);
    }
    auto wider = build_unet<float>(3, 5, 2);
    try {
      restore(wider->parameters(), "", StateScope::weights, loaded);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.fault() == CheckpointFault::shape);
    }
    CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.zsg"), CheckpointError);
  }
}

TEST_CASE("metrics csv") {
  CHECK(format_metrics({}) == std::string(kMetricsHeader) + "\n");
  std::vector<MetricsRow> rows{{"unet", true, "mixed", "d1", "cg", "1", 85.123456, 2.5},
                               {"unet", true, "mixed", "d1", "cg", "all", 85.0, 5.0}};
  const std::string text = format_metrics(rows);
  CHECK(text.find("unet,true,mixed,d1,cg,1,85.1235,2.5000") != std::string::npos);
  const auto back = parse_metrics(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1] == rows[1]);
  CHECK(back[0].dsc_mean == doctest::Approx(85.1235));
  CHECK_THROWS_AS(parse_metrics("wrong header\n"), DataError);
  CHECK_THROWS_AS(parse_metrics(std::string(kMetricsHeader) + "\nunet,true,mixed\n"), DataError);
  CHECK_THROWS_AS(parse_metrics(std::string(kMetricsHeader) + "\nunet,yes,mixed,d1,cg,1,1,1\n"),
                  DataError);
}
