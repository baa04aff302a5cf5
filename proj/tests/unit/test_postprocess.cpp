#include "doctest.h"
#include "morphology_oracle.hpp"
#include "zseg/errors.hpp"
#include "zseg/postprocess.hpp"
#include "zseg/rng.hpp"

using namespace zseg;

namespace {

Mask from_rows(const std::vector<std::string>& rows) {
  Mask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) m.at(y, x) = rows[y][x] == '#';
  }
  return m;
}

Mask random_mask(Rng& rng, int h, int w, double p) {
  Mask m(h, w);
  for (auto& v : m.data()) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

// n pixels filled row by row, `cols` per row.
Mask blob(int h, int w, int y0, int x0, int n, int cols = 4) {
  Mask m(h, w);
  for (int i = 0; i < n; ++i) m.at(y0 + i / cols, x0 + i % cols) = 1;
  return m;
}

}  // namespace

TEST_CASE("binarize is strict and gland-restricted") {
  Image logits(2, 3, std::vector<float>{-10.0f, 0.0f, 1e-6f, 3.0f, 3.0f, -1.0f});
  Mask wg(2, 3, 1);
  wg.at(1, 1) = 0;
  CHECK(binarize(logits, wg) == from_rows({"..#", "#.."}));
  CHECK(count(binarize(Image(4, 4, -10.0f), Mask(4, 4, 1))) == 0);
  CHECK_THROWS_AS(binarize(logits, Mask(3, 2)), ShapeError);
}

TEST_CASE("fill holes") {
  const Mask donut = from_rows({".....", ".###.", ".#.#.", ".###.", "....."});
  CHECK(fill_holes(donut) == from_rows({".....", ".###.", ".###.", ".###.", "....."}));
  const Mask open = from_rows({"#####", "#...#", "#....", "#####"});
  CHECK(fill_holes(open) == open);
  // A diagonal gap does not connect background under 4-connectivity.
  const Mask diagonal = from_rows({".#...", "#.#..", ".#...", "....."});
  CHECK(fill_holes(diagonal).at(1, 1) == 1);

  Rng rng(101);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Mask m = random_mask(rng, 16, 16, 0.2 + 0.5 * (i % 5) / 4.0);
    const Mask f = fill_holes(m);
    if (!(f == oracle::fill_holes(m))) ++mismatches;
    CHECK(is_subset(m, f));
    CHECK(fill_holes(f) == f);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("small component threshold boundary") {
  const Mask wg = blob(20, 20, 0, 0, 100, 10);
  CHECK(small_component_threshold(wg) == 12);
  const Mask eleven = blob(20, 20, 2, 2, 11);
  CHECK(count(remove_small_components(eleven, wg)) == 0);
  const Mask twelve = blob(20, 20, 2, 2, 12);
  CHECK(remove_small_components(twelve, wg) == twelve);
  // Eight-connected: a diagonal chain is one component.
  Mask chain(20, 20);
  for (int i = 0; i < 12; ++i) chain.at(i, i) = 1;
  CHECK(remove_small_components(chain, wg) == chain);
  CHECK(count(remove_small_components(mask_or(eleven, blob(20, 20, 10, 10, 12)), wg)) == 12);
}

TEST_CASE("component removal matches union-find oracle") {
  Rng rng(202);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Mask m = random_mask(rng, 16, 16, 0.1 + 0.4 * (i % 5) / 4.0);
    const Mask wg = random_mask(rng, 16, 16, rng.uniform(0.0, 1.0));
    const Mask r = remove_small_components(m, wg);
    if (!(r == oracle::remove_small_components(m, wg))) ++mismatches;
    CHECK(is_subset(r, m));
    CHECK(remove_small_components(r, wg) == r);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("exhaustive 3x3 morphology") {
  int mismatches = 0;
  const Mask wg_small(3, 3, 1);  // threshold 1: everything survives
  Mask wg_large(6, 6, 1);        // threshold 4
  for (int bits = 0; bits < 512; ++bits) {
    Mask m(3, 3);
    for (int i = 0; i < 9; ++i) m[i] = (bits >> i) & 1;
    Mask wg(3, 3);
    for (int i = 0; i < 9; ++i) wg[i] = ((bits * 7 + 3) >> (i % 5)) & 1;
    if (!(fill_holes(m) == oracle::fill_holes(m))) ++mismatches;
    if (!(remove_small_components(m, wg_small) == oracle::remove_small_components(m, wg_small))) ++mismatches;
    if (!(remove_small_components(m, wg) == oracle::remove_small_components(m, wg))) ++mismatches;
  }
  CHECK(mismatches == 0);
  CHECK(small_component_threshold(wg_large) == 4);
}

TEST_CASE("derive pz") {
  const Mask wg = blob(20, 20, 0, 0, 200, 10);
  CHECK(count(derive_pz(wg, wg).pz) == 0);
  CHECK(derive_pz(wg, Mask(20, 20)).pz == wg);
  const ZonalMask z = derive_pz(wg, blob(20, 20, 0, 0, 80, 10));
  CHECK(count(z.wg) == 200);
  CHECK(count(z.pz) == 120);
  CHECK(zonal_violations(z) == 0);
  CHECK_THROWS_AS(derive_pz(blob(20, 20, 0, 0, 10), blob(20, 20, 0, 0, 11)), InvariantError);
  ZonalMask broken = z;
  broken.pz.at(0, 0) = 1;  // overlaps cg
  broken.pz.at(19, 19) = 1;  // outside wg
  CHECK(zonal_violations(broken) == 2);
}

TEST_CASE("full post-processing keeps zonal constraints") {
  Rng rng(303);
  for (int i = 0; i < 200; ++i) {
    Image logits(24, 24);
    for (auto& v : logits.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const Mask wg = random_mask(rng, 24, 24, 0.7);
    const ZonalMask z = postprocess(logits, wg);
    CHECK(zonal_violations(z) == 0);
    CHECK(is_subset(z.cg, wg));
    CHECK(postprocess(logits, wg).cg == z.cg);
  }
}
