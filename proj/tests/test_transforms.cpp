// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "m3i/error.hpp"
#include "m3i/rng.hpp"
#include "m3i/transforms/transforms.hpp"

using namespace m3i;
using core::Image;
using core::Sample;
using transforms::AugmentSpec;
using transforms::MaskPattern;

namespace {

Sample noise_sample(int id, int res = 32) {
  Sample s;
  s.id = id;
  s.image = Image(res, res, 3);
  Rng rng(static_cast<uint64_t>(id) * 31 + 7);
  for (double& v : s.image.data) v = rng.uniform();
  return s;
}

AugmentSpec noop_spec() {
  AugmentSpec a;
  a.crop_scale_lo = a.crop_scale_hi = 1.0;
  a.flip_prob = 0.0;
  a.jitter_strength = 0.0;
  a.jitter_prob = 0.0;
  a.grayscale_prob = 0.0;
  a.blur_prob = 0.0;
  a.solarize_prob = 0.0;
  return a;
}

core::ViewRecord const_view(double value, int res, int sample_id) {
  core::ViewRecord v;
  v.pixels = Image(res, res, 3);
  for (double& p : v.pixels.data) p = value;
  v.source_sample_id = sample_id;
  v.descriptor.out_h = v.descriptor.out_w = res;
  v.descriptor.crop_box = {0, 0, res, res};
  return v;
}

}  // namespace

TEST_CASE("no-op augmentation reproduces the resized source") {
  Sample s = noise_sample(0);
  core::ViewRecord v = transforms::sample_augmentation(s, noop_spec(), 42);
  CHECK(v.pixels.data == s.image.data);
}

TEST_CASE("sample_augmentation is deterministic in the seed") {
  Sample s = noise_sample(1);
  AugmentSpec a;  // defaults exercise every op
  core::ViewRecord v1 = transforms::sample_augmentation(s, a, 99);
  core::ViewRecord v2 = transforms::sample_augmentation(s, a, 99);
  CHECK(v1.descriptor == v2.descriptor);
  CHECK(v1.pixels.data == v2.pixels.data);
}

TEST_CASE("distinct seeds give distinct descriptors across 1000 draws") {
  // Draws whose jitter resolves to a no-op live in the discrete crop x flip
  // space (~4e3 states on a 32x32 source), which predicts about two birthday
  // collisions among the ~130 such draws in 1000; draws with jitter applied
  // carry continuous parameters and must never collide.
  Sample s = noise_sample(2);
  AugmentSpec a;
  std::set<std::string> seen, seen_continuous;
  int continuous = 0;
  for (int k = 0; k < 1000; ++k) {
    core::ViewRecord v = transforms::sample_augmentation(s, a, 1000 + static_cast<uint64_t>(k));
    const auto& d = v.descriptor;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%d,%.17g,%.17g,%.17g,%d,%d,%d",
                  d.crop_box.top, d.crop_box.left, d.crop_box.height, d.crop_box.width,
                  d.flip ? 1 : 0, d.photo.brightness, d.photo.contrast, d.photo.saturation,
                  d.photo.grayscale ? 1 : 0, d.photo.blur ? 1 : 0, d.photo.solarize ? 1 : 0);
    seen.insert(buf);
    if (d.photo.brightness != 1.0) {
      ++continuous;
      seen_continuous.insert(buf);
    }
  }
  CHECK(seen.size() >= 985);
  CHECK(continuous > 600);  // jitter_prob is 0.8
  CHECK(seen_continuous.size() == static_cast<size_t>(continuous));
}

TEST_CASE("augmentation replay round-trips bit-exactly") {
  Sample s = noise_sample(3);
  AugmentSpec a;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    core::ViewRecord v = transforms::sample_augmentation(s, a, seed);
    core::ViewRecord r = core::replay_transform(s, v.descriptor);
    REQUIRE(v.pixels.data == r.pixels.data);
  }
}

TEST_CASE("augmentation rejects tiny images") {
  Sample s = noise_sample(4, 1);
  s.image = Image(1, 1, 3);
  CHECK_THROWS_AS(transforms::sample_augmentation(s, AugmentSpec{}, 0), ImageTooSmall);
}

TEST_CASE("blockwise mask hits the exact zero count") {
  SUBCASE("ratio 0 gives all ones") {
    MaskPattern m = transforms::generate_blockwise_mask(8, 8, 0.0, 4, 1);
    CHECK(m.zero_count() == 0);
  }
  SUBCASE("14x14 at 50% gives exactly 98 zeros") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      MaskPattern m = transforms::generate_blockwise_mask(14, 14, 0.5, 16, seed);
      REQUIRE(m.zero_count() == 98);
    }
  }
  SUBCASE("ratio 1 gives all zeros") {
    MaskPattern m = transforms::generate_blockwise_mask(8, 8, 1.0, 4, 2);
    CHECK(m.zero_count() == 64);
  }
  SUBCASE("exactness over a sweep grid") {
    for (int gh : {4, 7, 8, 14})
      for (int gw : {4, 9, 14})
        for (double ratio : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})
          for (uint64_t seed = 0; seed < 3; ++seed) {
            MaskPattern m = transforms::generate_blockwise_mask(gh, gw, ratio, 4, seed);
            REQUIRE(m.zero_count() ==
                    static_cast<int>(std::lround(ratio * gh * gw)));
          }
  }
}

TEST_CASE("blockwise zeros form contiguous regions, not speckle") {
  // a rectangle-union layout has far fewer 4-connected components than an
  // i.i.d. pattern with the same density (which averages ~25 on this grid)
  for (uint64_t seed = 0; seed < 20; ++seed) {
    MaskPattern m = transforms::generate_blockwise_mask(14, 14, 0.5, 16, seed);
    std::vector<int> comp(m.grid.size(), -1);
    int ncomp = 0;
    for (int r = 0; r < 14; ++r)
      for (int c = 0; c < 14; ++c) {
        if (m.at(r, c) != 0 || comp[static_cast<size_t>(r * 14 + c)] >= 0) continue;
        std::vector<int> stack = {r * 14 + c};
        comp[static_cast<size_t>(r * 14 + c)] = ncomp;
        while (!stack.empty()) {
          const int cur = stack.back();
          stack.pop_back();
          const int cr = cur / 14, cc = cur % 14;
          const int nb[4][2] = {{cr - 1, cc}, {cr + 1, cc}, {cr, cc - 1}, {cr, cc + 1}};
          for (auto& n : nb) {
            if (n[0] < 0 || n[0] >= 14 || n[1] < 0 || n[1] >= 14) continue;
            const int off = n[0] * 14 + n[1];
            if (m.grid[static_cast<size_t>(off)] == 0 && comp[static_cast<size_t>(off)] < 0) {
              comp[static_cast<size_t>(off)] = ncomp;
              stack.push_back(off);
            }
          }
        }
        ++ncomp;
      }
    CHECK(ncomp <= 14);
  }
}

TEST_CASE("mask determinism and serialization round-trip") {
  MaskPattern a = transforms::generate_blockwise_mask(8, 8, 0.5, 4, 77);
  MaskPattern b = transforms::generate_blockwise_mask(8, 8, 0.5, 4, 77);
  CHECK(a.grid == b.grid);
  MaskPattern c = transforms::MaskPattern::deserialize(a.serialize());
  CHECK(c.grid == a.grid);
  CHECK(c.gh == a.gh);
  CHECK(c.gw == a.gw);
  CHECK(c.patch_size == a.patch_size);
  CHECK(c.ratio == doctest::Approx(a.ratio));
  CHECK_THROWS_AS(transforms::MaskPattern::deserialize("garbage"), Error);
}

TEST_CASE("mix_views identities and the hand-evaluated block case") {
  core::ViewRecord a = const_view(1.0, 8, 0);
  core::ViewRecord b = const_view(0.0, 8, 1);

  MaskPattern ones = transforms::generate_blockwise_mask(2, 2, 0.0, 4, 0);
  Image mix1 = transforms::mix_views(a, b, ones);
  CHECK(mix1.data == a.pixels.data);

  MaskPattern zeros = transforms::generate_blockwise_mask(2, 2, 1.0, 4, 0);
  Image mix0 = transforms::mix_views(a, b, zeros);
  CHECK(mix0.data == b.pixels.data);

  // 2x2 grid [[1,0],[0,1]] with p=2 on 4x4 constants: ones in the
  // top-left and bottom-right 2x2 pixel blocks
  core::ViewRecord a4 = const_view(1.0, 4, 0);
  core::ViewRecord b4 = const_view(0.0, 4, 1);
  MaskPattern diag;
  diag.gh = diag.gw = 2;
  diag.patch_size = 2;
  diag.ratio = 0.5;
  diag.grid = {1, 0, 0, 1};
  Image mixed = transforms::mix_views(a4, b4, diag);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const double want = ((y < 2 && x < 2) || (y >= 2 && x >= 2)) ? 1.0 : 0.0;
      for (int ch = 0; ch < 3; ++ch) REQUIRE(mixed.at(y, x, ch) == want);
    }
}

TEST_CASE("mix linearity: mix(a,b,m) + mix(b,a,m) == a + b") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    core::ViewRecord a = const_view(0, 16, 0), b = const_view(0, 16, 1);
    for (double& v : a.pixels.data) v = rng.uniform();
    for (double& v : b.pixels.data) v = rng.uniform();
    MaskPattern m = transforms::generate_blockwise_mask(4, 4, rng.uniform(), 4, trial);
    Image ab = transforms::mix_views(a, b, m);
    Image ba = transforms::mix_views(b, a, m);
    for (size_t i = 0; i < ab.data.size(); ++i)
      REQUIRE(ab.data[i] + ba.data[i] ==
              doctest::Approx(a.pixels.data[i] + b.pixels.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("expanded pixel mask is constant on every patch block") {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int gh = rng.uniform_int(2, 6), gw = rng.uniform_int(2, 6);
    const int p = 2 * rng.uniform_int(1, 3);
    MaskPattern m = transforms::generate_blockwise_mask(gh, gw, rng.uniform(), p, trial);
    core::ViewRecord a = const_view(1.0, 0, 0), b = const_view(0.0, 0, 1);
    a.pixels = Image(gh * p, gw * p, 1);
    b.pixels = Image(gh * p, gw * p, 1);
    for (double& v : a.pixels.data) v = 1.0;
    Image mixed = transforms::mix_views(a, b, m);
    for (int gr = 0; gr < gh; ++gr)
      for (int gc = 0; gc < gw; ++gc) {
        const double v0 = mixed.at(gr * p, gc * p, 0);
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx)
            REQUIRE(mixed.at(gr * p + dy, gc * p + dx, 0) == v0);
      }
  }
}

TEST_CASE("mix_views validates shapes") {
  core::ViewRecord a = const_view(1.0, 8, 0), b = const_view(0.0, 16, 1);
  MaskPattern m = transforms::generate_blockwise_mask(2, 2, 0.5, 4, 0);
  CHECK_THROWS_AS(transforms::mix_views(a, b, m), ShapeMismatch);
}

TEST_CASE("token drop keeps visible rows with their grid indices") {
  const int n = 196;
  ad::Matrix tokens(n, 8);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 8; ++j) tokens(i, j) = i + 0.01 * j;

  MaskPattern all_ones = transforms::generate_blockwise_mask(14, 14, 0.0, 16, 0);
  auto kept = transforms::apply_token_drop(ad::constant(tokens), all_ones,
                                           transforms::TokenDropMode::drop);
  CHECK(kept.tokens.rows() == n);

  MaskPattern half = transforms::generate_blockwise_mask(14, 14, 0.5, 16, 3);
  auto dropped = transforms::apply_token_drop(ad::constant(tokens), half,
                                              transforms::TokenDropMode::drop);
  CHECK(dropped.tokens.rows() == 98);
  CHECK(dropped.grid_indices.size() == 98);
  for (size_t i = 0; i < dropped.grid_indices.size(); ++i) {
    const int g = dropped.grid_indices[i];
    REQUIRE(half.grid[static_cast<size_t>(g)] == 1);
    REQUIRE(dropped.tokens.value()(static_cast<long>(i), 0) == tokens(g, 0));
  }

  auto masked = transforms::apply_token_drop(ad::constant(tokens), half,
                                             transforms::TokenDropMode::mask_token,
                                             ad::constant(ad::Matrix::Constant(1, 8, -5.0)));
  CHECK(masked.tokens.rows() == 196);
  for (int g = 0; g < n; ++g) {
    if (half.grid[static_cast<size_t>(g)] == 0)
      REQUIRE(masked.tokens.value()(g, 0) == -5.0);
    else
      REQUIRE(masked.tokens.value()(g, 0) == tokens(g, 0));
  }
}

TEST_CASE("token drop validates shapes") {
  ad::Matrix tokens(16, 4);
  tokens.setZero();
  MaskPattern m = transforms::generate_blockwise_mask(2, 2, 0.5, 4, 0);
  CHECK_THROWS_AS(
      transforms::apply_token_drop(ad::constant(tokens), m, transforms::TokenDropMode::drop),
      ShapeMismatch);
  MaskPattern m4 = transforms::generate_blockwise_mask(4, 4, 0.5, 4, 0);
  CHECK_THROWS_AS(transforms::apply_token_drop(ad::constant(tokens), m4,
                                               transforms::TokenDropMode::mask_token,
                                               ad::constant(ad::Matrix::Zero(1, 5))),
                  ShapeMismatch);
}
