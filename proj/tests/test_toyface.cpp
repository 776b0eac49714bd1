#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "auda/rng.hpp"
#include "auda/toyface.hpp"
#include "doctest.h"

using namespace auda;

namespace {

ToyFaceSample make_sample(Domain d, int identity_id, std::uint64_t seed,
                          std::vector<std::uint8_t> bits) {
  ToyFaceSample s;
  s.identity = sample_identity(identity_id, derive_seed(seed, "id"));
  s.style = sample_style(d, derive_seed(seed, "style"));
  s.au.bits = std::move(bits);
  s.frame_seed = derive_seed(seed, "frame");
  s.image = render_face(s.au, s.identity, s.style, s.frame_seed, 64, 64);
  return s;
}

double l1_diff(const Tensor<float>& a, const Tensor<float>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    acc += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  return acc;
}

bool bitwise_equal(const Tensor<float>& a, const Tensor<float>& b) {
  return a.numel() == b.numel() &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(float)) == 0;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("rendering is a pure function of its parameters") {
  ToyFaceSample s = make_sample(Domain::source, 3, 77, {1, 0, 1, 0, 1});
  Tensor<float> again =
      render_face(s.au, s.identity, s.style, s.frame_seed, 64, 64);
  CHECK(bitwise_equal(s.image, again));

  Tensor<float> other =
      render_face(s.au, s.identity, s.style, s.frame_seed + 1, 64, 64);
  CHECK(l1_diff(s.image, other) > 0.0);
}

TEST_CASE("speckle and stripes render deterministically") {
  for (Domain d : {Domain::source, Domain::target}) {
    ToyFaceSample s = make_sample(d, 9, 123, {0, 1, 1});
    Tensor<float> again =
        render_face(s.au, s.identity, s.style, s.frame_seed, 64, 64);
    CHECK(bitwise_equal(s.image, again));
  }
}

TEST_CASE("toggling one AU bit only changes pixels in its band") {
  const std::size_t H = 64, W = 64;
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t K = trial < 60 ? 5 : 10;
    const std::uint64_t seed = derive_seed(0xFACE, "loc", trial);
    IdentitySpec id = sample_identity(trial, derive_seed(seed, "id"));
    DomainStyleSpec st = sample_style(
        trial % 4 < 2 ? Domain::source : Domain::target,
        derive_seed(seed, "style"));
    AULabelVector au =
        sample_au(std::vector<double>(K, 0.5), derive_seed(seed, "au"));
    const std::size_t k = trial % K;

    AULabelVector flipped = au;
    flipped.bits[k] ^= 1;

    Tensor<float> a = render_face(au, id, st, seed, H, W);
    Tensor<float> b = render_face(flipped, id, st, seed, H, W);
    RegionMask m = region_mask(k, H);

    bool any = false;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          if (a.data()[(c * H + y) * W + x] != b.data()[(c * H + y) * W + x]) {
            any = true;
            REQUIRE(y >= m.y0);
            REQUIRE(y < m.y1);
          }
    CHECK(any);
    ++checked;
  }
  CHECK(checked == 120);
}

TEST_CASE("brightness edit is a uniform pre-clamp shift, geometry fixed") {
  IdentitySpec id = sample_identity(5, 991);
  DomainStyleSpec lo = sample_style(Domain::source, 992);
  lo.brightness = -0.1;
  DomainStyleSpec hi = lo;
  hi.brightness = 0.1;
  AULabelVector au{{1, 1, 0, 0, 1}};

  Tensor<float> a = render_face_linear(au, id, lo, 31337, 64, 64);
  Tensor<float> b = render_face_linear(au, id, hi, 31337, 64, 64);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(b.data()[i]) - a.data()[i];
    CHECK(std::abs(d - 0.2) < 1e-6);
  }

  Landmarks lm = landmarks(id);
  CHECK(lm.eye_left[1] == id.eye_height);
  CHECK(lm.eye_right[0] - lm.eye_left[0] == doctest::Approx(id.eye_spacing));
  CHECK(lm.mouth_center[1] == id.mouth_height);
  CHECK(lm.mouth_right[0] - lm.mouth_left[0] ==
        doctest::Approx(id.mouth_width));
}

TEST_CASE("parameter validation names the offending field") {
  IdentitySpec id = sample_identity(0, 1);
  id.face_rx = 0.5;
  CHECK_THROWS_WITH_AS(id.validate(),
                       doctest::Contains("face_rx"), std::invalid_argument);

  DomainStyleSpec st = sample_style(Domain::target, 2);
  st.contrast = 2.0;
  CHECK_THROWS_WITH_AS(st.validate(),
                       doctest::Contains("contrast"), std::invalid_argument);

  AULabelVector au{{1, 0}};
  CHECK_THROWS_AS(au.validate(), std::invalid_argument);
  au.bits = {0, 1, 2};
  CHECK_THROWS_AS(au.validate(), std::invalid_argument);

  CHECK_THROWS_AS(render_face(AULabelVector{{1, 0, 1}}, sample_identity(0, 3),
                              sample_style(Domain::source, 4), 5, 8, 64),
                  std::invalid_argument);
  CHECK_THROWS_AS(region_mask(10, 64), std::invalid_argument);
}

TEST_CASE("oracle swap rejects same-domain pairs") {
  ToyFaceSample a = make_sample(Domain::source, 0, 10, {1, 0, 1});
  ToyFaceSample b = make_sample(Domain::source, 1, 11, {0, 1, 1});
  CHECK_THROWS_AS(oracle_swap(a, b), std::invalid_argument);
}

TEST_CASE("oracle swap with equal AU reproduces each input exactly") {
  ToyFaceSample s = make_sample(Domain::source, 2, 20, {1, 0, 0, 1, 1});
  ToyFaceSample t = make_sample(Domain::target, 3, 21, {1, 0, 0, 1, 1});
  auto [st, ts] = oracle_swap(s, t);
  CHECK(bitwise_equal(st, s.image));
  CHECK(bitwise_equal(ts, t.image));
}

TEST_CASE("oracle swap differs from the original iff the AU bits differ") {
  for (int a = 0; a < 8; ++a) {
    ToyFaceSample s = make_sample(
        Domain::source, 4, 30,
        {static_cast<std::uint8_t>(a & 1), static_cast<std::uint8_t>((a >> 1) & 1),
         static_cast<std::uint8_t>((a >> 2) & 1)});
    for (int b = 0; b < 8; ++b) {
      ToyFaceSample t = make_sample(
          Domain::target, 5, 31,
          {static_cast<std::uint8_t>(b & 1),
           static_cast<std::uint8_t>((b >> 1) & 1),
           static_cast<std::uint8_t>((b >> 2) & 1)});
      auto [st, ts] = oracle_swap(s, t);
      const double d_st = l1_diff(st, s.image);
      const double d_ts = l1_diff(ts, t.image);
      if (a == b) {
        CHECK(d_st == 0.0);
        CHECK(d_ts == 0.0);
      } else {
        CHECK(d_st > 0.0);
        CHECK(d_ts > 0.0);
      }
    }
  }
}

TEST_CASE("generative factors are sampled independently") {
  const int n = 2000;
  std::vector<double> bit0(n), bright(n), face(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t master = 0xD15EA5E;
    AULabelVector au = sample_au({0.5, 0.5, 0.5, 0.5, 0.5},
                                 derive_seed(master, "au", i));
    DomainStyleSpec st =
        sample_style(Domain::source, derive_seed(master, "style", i));
    IdentitySpec id = sample_identity(i, derive_seed(master, "identity", i));
    bit0[i] = au.bits[0];
    bright[i] = st.brightness;
    face[i] = id.face_rx;
  }
  CHECK(std::abs(pearson(bit0, bright)) < 0.1);
  CHECK(std::abs(pearson(bit0, face)) < 0.1);
  CHECK(std::abs(pearson(bright, face)) < 0.1);
}

TEST_CASE("AU marginals hit their configured probabilities") {
  const std::vector<double> p = {0.5, 0.3, 0.7, 0.5, 0.2};
  const int n = 2000;
  std::vector<double> mean(p.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    AULabelVector au = sample_au(p, derive_seed(0xA0, "au", i));
    for (std::size_t k = 0; k < p.size(); ++k) mean[k] += au.bits[k];
  }
  for (std::size_t k = 0; k < p.size(); ++k)
    CHECK(std::abs(mean[k] / n - p[k]) <= 0.05);

  CHECK_THROWS_AS(sample_au({0.5, 0.5}, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_au({0.5, 0.5, 1.5}, 1), std::invalid_argument);
}

TEST_CASE("domain style distributions are separated on every axis") {
  double src_hue_min = 1e9, src_hue_max = -1e9;
  double tgt_hue_min = 1e9, tgt_hue_max = -1e9;
  for (int i = 0; i < 50; ++i) {
    DomainStyleSpec s = sample_style(Domain::source, derive_seed(7, "s", i));
    DomainStyleSpec t = sample_style(Domain::target, derive_seed(7, "t", i));
    s.validate();
    t.validate();
    CHECK(s.texture_kind == TextureKind::stripes);
    CHECK(t.texture_kind == TextureKind::speckle);
    CHECK(s.contrast > t.contrast);
    CHECK(s.tint > 0.0);
    CHECK(t.tint < 0.0);
    src_hue_min = std::min(src_hue_min, s.background_hue);
    src_hue_max = std::max(src_hue_max, s.background_hue);
    tgt_hue_min = std::min(tgt_hue_min, t.background_hue);
    tgt_hue_max = std::max(tgt_hue_max, t.background_hue);
  }
  CHECK(tgt_hue_max < src_hue_min);
}

TEST_CASE("sampled specs always pass validation") {
  for (int i = 0; i < 200; ++i) {
    sample_identity(i, derive_seed(0xB0, "id", i)).validate();
    sample_style(i % 2 ? Domain::source : Domain::target,
                 derive_seed(0xB0, "st", i))
        .validate();
  }
}

TEST_CASE("region masks are within bounds and cover the feature groups") {
  for (std::size_t k = 0; k < 10; ++k) {
    RegionMask m = region_mask(k, 64);
    CHECK(m.y0 < m.y1);
    CHECK(m.y1 <= 64);
  }
  CHECK(region_mask(0, 64).y0 == region_mask(3, 64).y0);
  CHECK(region_mask(0, 64).y0 == region_mask(5, 64).y0);
  CHECK(region_mask(2, 64).y0 == region_mask(6, 64).y0);
  CHECK(region_mask(1, 64).y0 == region_mask(4, 64).y0);
  CHECK(region_mask(1, 64).y1 > region_mask(2, 64).y1);
}
