#include "auda/toyface.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "auda/rng.hpp"

namespace auda {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Horizontal bands (normalized rows) that the three feature groups live in.
// The geometry ranges plus the worst-case AU offsets and frame jitter were
// chosen so strokes stay strictly inside their band.
constexpr double kBrowBandLo = 0.18, kBrowBandHi = 0.40;
constexpr double kEyeBandLo = 0.40, kEyeBandHi = 0.58;
constexpr double kMouthBandLo = 0.62, kMouthBandHi = 0.92;

// AU stroke magnitudes (normalized units).  Every toggle moves geometry by
// at least one pixel row or column at 64x64 under any combination of the
// other bits, so a bit flip always changes the rendered image.
constexpr double kBrowRaise = 0.045;
constexpr double kSmileCurve = 0.06;
constexpr double kFrownCurve = 0.05;
constexpr double kEyeWidenAdd = 0.020;
constexpr double kEyeSquintMul = 0.55;
constexpr double kBrowTiltSlope = 0.30;
constexpr double kBrowThickBase = 0.008, kBrowThickExtra = 0.016;
constexpr double kBrowHalfLen = 0.055;
constexpr double kMouthGap = 0.035;
constexpr double kLipThickBase = 0.011, kLipThickExtra = 0.016;
constexpr double kDimpleRadius = 0.016;
constexpr double kLidHalfLenAdd = 0.016, kLidThick = 0.008;
constexpr double kFrameJitter = 0.01;
constexpr double kFrameNoise = 0.02;

// Feature group per AU bit; indexes into the band table in region_mask.
constexpr int kBitBand[kMaxAU] = {0, 2, 1, 0, 2, 0, 1, 2, 2, 2};

struct Raster {
  double* rgb;  // [3][h][w]
  std::size_t h, w;

  void set(std::size_t y, std::size_t x, const double c[3]) {
    for (int ch = 0; ch < 3; ++ch) rgb[(ch * h + y) * w + x] = c[ch];
  }
};

// All fills test the pixel center against the analytic shape, so rendering
// is a pure function of the parameters and the raster size.

void fill_ellipse(Raster& r, double cx, double cy, double rx, double ry,
                  const double color[3]) {
  const std::size_t x0 = static_cast<std::size_t>(
      std::max(0.0, std::floor((cx - rx) * r.w - 0.5)));
  const std::size_t x1 = static_cast<std::size_t>(std::min(
      static_cast<double>(r.w), std::ceil((cx + rx) * r.w + 0.5)));
  const std::size_t y0 = static_cast<std::size_t>(
      std::max(0.0, std::floor((cy - ry) * r.h - 0.5)));
  const std::size_t y1 = static_cast<std::size_t>(std::min(
      static_cast<double>(r.h), std::ceil((cy + ry) * r.h + 0.5)));
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      const double dx = ((x + 0.5) / r.w - cx) / rx;
      const double dy = ((y + 0.5) / r.h - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) r.set(y, x, color);
    }
}

void fill_shaded_ellipse(Raster& r, double cx, double cy, double rx, double ry,
                         const double color[3]) {
  for (std::size_t y = 0; y < r.h; ++y)
    for (std::size_t x = 0; x < r.w; ++x) {
      const double dx = ((x + 0.5) / r.w - cx) / rx;
      const double dy = ((y + 0.5) / r.h - cy) / ry;
      const double rho2 = dx * dx + dy * dy;
      if (rho2 <= 1.0) {
        const double shade = 1.0 - 0.12 * rho2;
        double c[3] = {color[0] * shade, color[1] * shade, color[2] * shade};
        r.set(y, x, c);
      }
    }
}

// Thick line segment y = yc + slope * (x - xc), |x - xc| <= half_len.
void fill_stroke(Raster& r, double xc, double yc, double half_len, double slope,
                 double thick, const double color[3]) {
  const std::size_t x0 = static_cast<std::size_t>(
      std::max(0.0, std::floor((xc - half_len) * r.w - 0.5)));
  const std::size_t x1 = static_cast<std::size_t>(std::min(
      static_cast<double>(r.w), std::ceil((xc + half_len) * r.w + 0.5)));
  for (std::size_t x = x0; x < x1; ++x) {
    const double u = (x + 0.5) / r.w;
    if (std::abs(u - xc) > half_len) continue;
    const double yl = yc + slope * (u - xc);
    for (std::size_t y = 0; y < r.h; ++y) {
      const double v = (y + 0.5) / r.h;
      if (std::abs(v - yl) <= thick) r.set(y, x, color);
    }
  }
}

// Mouth curve: y(u) = yc - curve * ((2(u-xc)/width)^2 - 0.5).  Positive
// curve lifts the corners (smile), negative drops them (frown).
double mouth_curve_y(double u, double xc, double yc, double width,
                     double curve) {
  const double t = 2.0 * (u - xc) / width;
  return yc - curve * (t * t - 0.5);
}

void range_check(bool ok, const char* type, const char* field, double lo,
                 double hi) {
  if (!ok)
    throw std::invalid_argument(std::string(type) + ": " + field +
                                " out of range [" + std::to_string(lo) + "," +
                                std::to_string(hi) + "]");
}

void hsv_to_rgb(double h, double s, double v, double out[3]) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c, g = x;
  } else if (hp < 2) {
    r = x, g = c;
  } else if (hp < 3) {
    g = c, b = x;
  } else if (hp < 4) {
    g = x, b = c;
  } else if (hp < 5) {
    r = x, b = c;
  } else {
    r = c, b = x;
  }
  const double m = v - c;
  out[0] = r + m;
  out[1] = g + m;
  out[2] = b + m;
}

std::uint64_t style_texture_seed(const DomainStyleSpec& style) {
  std::uint64_t a = std::bit_cast<std::uint64_t>(style.background_hue);
  std::uint64_t b = std::bit_cast<std::uint64_t>(style.texture_strength);
  std::uint64_t s = splitmix64(a) ^ b;
  return splitmix64(s);
}

}  // namespace

void AULabelVector::validate() const {
  if (bits.size() < kMinAU || bits.size() > kMaxAU)
    throw std::invalid_argument("AULabelVector: size out of range [3,10]");
  for (std::uint8_t b : bits)
    if (b > 1)
      throw std::invalid_argument("AULabelVector: bits must be 0 or 1");
}

void IdentitySpec::validate() const {
  auto chk = [](double v, double lo, double hi, const char* field) {
    range_check(v >= lo && v <= hi, "IdentitySpec", field, lo, hi);
  };
  chk(face_rx, 0.26, 0.34, "face_rx");
  chk(face_ry, 0.32, 0.40, "face_ry");
  chk(eye_spacing, 0.20, 0.30, "eye_spacing");
  chk(eye_height, 0.46, 0.50, "eye_height");
  chk(eye_rx, 0.030, 0.042, "eye_rx");
  chk(eye_aperture, 0.014, 0.022, "eye_aperture");
  chk(brow_height, 0.29, 0.34, "brow_height");
  chk(mouth_width, 0.18, 0.28, "mouth_width");
  chk(mouth_height, 0.72, 0.78, "mouth_height");
  chk(skin_r, 0.65, 0.85, "skin_r");
  chk(skin_g, 0.50, 0.70, "skin_g");
  chk(skin_b, 0.40, 0.60, "skin_b");
}

const char* texture_kind_name(TextureKind k) {
  switch (k) {
    case TextureKind::stripes:
      return "stripes";
    case TextureKind::speckle:
      return "speckle";
    default:
      return "flat";
  }
}

TextureKind texture_kind_from_name(const std::string& name) {
  if (name == "stripes") return TextureKind::stripes;
  if (name == "speckle") return TextureKind::speckle;
  if (name == "flat") return TextureKind::flat;
  throw std::invalid_argument("unknown texture kind: " + name);
}

void DomainStyleSpec::validate() const {
  auto chk = [](double v, double lo, double hi, const char* field) {
    range_check(v >= lo && v <= hi, "DomainStyleSpec", field, lo, hi);
  };
  range_check(background_hue >= 0.0 && background_hue < 1.0, "DomainStyleSpec",
              "background_hue", 0.0, 1.0);
  chk(brightness, -0.3, 0.3, "brightness");
  chk(contrast, 0.5, 1.5, "contrast");
  chk(tint, -1.0, 1.0, "tint");
  chk(texture_strength, 0.0, 0.5, "texture_strength");
}

Landmarks landmarks(const IdentitySpec& id) {
  id.validate();
  Landmarks lm{};
  const double half = id.eye_spacing / 2.0;
  lm.eye_left[0] = 0.5 - half;
  lm.eye_left[1] = id.eye_height;
  lm.eye_right[0] = 0.5 + half;
  lm.eye_right[1] = id.eye_height;
  lm.brow_left[0] = 0.5 - half;
  lm.brow_left[1] = id.brow_height;
  lm.brow_right[0] = 0.5 + half;
  lm.brow_right[1] = id.brow_height;
  lm.mouth_center[0] = 0.5;
  lm.mouth_center[1] = id.mouth_height;
  lm.mouth_left[0] = 0.5 - id.mouth_width / 2.0;
  lm.mouth_left[1] = id.mouth_height;
  lm.mouth_right[0] = 0.5 + id.mouth_width / 2.0;
  lm.mouth_right[1] = id.mouth_height;
  return lm;
}

RegionMask region_mask(std::size_t au_bit, std::size_t height) {
  if (au_bit >= kMaxAU)
    throw std::invalid_argument("region_mask: au_bit out of range");
  constexpr double lo[3] = {kBrowBandLo, kEyeBandLo, kMouthBandLo};
  constexpr double hi[3] = {kBrowBandHi, kEyeBandHi, kMouthBandHi};
  const int band = kBitBand[au_bit];
  RegionMask m;
  m.y0 = static_cast<std::size_t>(std::floor(lo[band] * height));
  m.y1 = std::min(height,
                  static_cast<std::size_t>(std::ceil(hi[band] * height)));
  return m;
}

Tensor<float> render_face_linear(const AULabelVector& au,
                                 const IdentitySpec& id,
                                 const DomainStyleSpec& style,
                                 std::uint64_t frame_seed, std::size_t height,
                                 std::size_t width) {
  au.validate();
  id.validate();
  style.validate();
  if (height < 16 || height > 512 || width < 16 || width > 512)
    throw std::invalid_argument("render_face: image size out of range [16,512]");

  auto bit = [&](std::size_t k) -> double {
    return k < au.bits.size() && au.bits[k] ? 1.0 : 0.0;
  };

  std::vector<double> buf(3 * height * width);
  Raster r{buf.data(), height, width};

  // Frame conditions: a small rigid shift shared by every stroke.
  Rng frame_rng(derive_seed(frame_seed, "frame-jitter"));
  const double jx = frame_rng.uniform(-kFrameJitter, kFrameJitter);
  const double jy = frame_rng.uniform(-kFrameJitter, kFrameJitter);

  double bg[3];
  hsv_to_rgb(style.background_hue, 0.55, 0.85, bg);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) r.set(y, x, bg);

  const double skin[3] = {id.skin_r, id.skin_g, id.skin_b};
  fill_shaded_ellipse(r, 0.5 + jx, 0.55 + jy, id.face_rx, id.face_ry, skin);

  const double dark[3] = {id.skin_r * 0.28, id.skin_g * 0.25, id.skin_b * 0.24};
  const double lip[3] = {id.skin_r * 0.55, id.skin_g * 0.28, id.skin_b * 0.26};
  const double cavity[3] = {0.10, 0.06, 0.06};

  const double half = id.eye_spacing / 2.0;

  // Brows.
  {
    const double yb = id.brow_height + jy - kBrowRaise * bit(0);
    const double th = kBrowThickBase + kBrowThickExtra * bit(5);
    const double tilt = kBrowTiltSlope * bit(3);
    fill_stroke(r, 0.5 - half + jx, yb, kBrowHalfLen, tilt, th, dark);
    fill_stroke(r, 0.5 + half + jx, yb, kBrowHalfLen, -tilt, th, dark);
  }

  // Eyes.  Widening adds a fixed aperture increment and squinting shrinks
  // the remainder and draws a lid stroke, so either toggle stays visible
  // when the other bit is set.
  {
    const double ap =
        id.eye_aperture * (bit(6) ? kEyeSquintMul : 1.0) + kEyeWidenAdd * bit(2);
    const double ye = id.eye_height + jy;
    fill_ellipse(r, 0.5 - half + jx, ye, id.eye_rx, ap, dark);
    fill_ellipse(r, 0.5 + half + jx, ye, id.eye_rx, ap, dark);
    if (bit(6) > 0.0) {
      fill_stroke(r, 0.5 - half + jx, ye, id.eye_rx + kLidHalfLenAdd, 0.0,
                  kLidThick, dark);
      fill_stroke(r, 0.5 + half + jx, ye, id.eye_rx + kLidHalfLenAdd, 0.0,
                  kLidThick, dark);
    }
  }

  // Mouth.
  {
    const double xc = 0.5 + jx;
    const double yc = id.mouth_height + jy;
    const double wdt = id.mouth_width;
    const double curve = kSmileCurve * bit(1) - kFrownCurve * bit(7);
    const double th = kLipThickBase + kLipThickExtra * bit(8);

    const std::size_t x0 = static_cast<std::size_t>(
        std::max(0.0, std::floor((xc - wdt / 2) * width - 0.5)));
    const std::size_t x1 = static_cast<std::size_t>(std::min(
        static_cast<double>(width), std::ceil((xc + wdt / 2) * width + 0.5)));
    const bool open = bit(4) > 0.0;
    for (std::size_t x = x0; x < x1; ++x) {
      const double u = (x + 0.5) / width;
      if (std::abs(u - xc) > wdt / 2) continue;
      const double yl = mouth_curve_y(u, xc, yc, wdt, curve);
      const bool inner = std::abs(u - xc) <= 0.4 * wdt;
      for (std::size_t y = 0; y < height; ++y) {
        const double v = (y + 0.5) / height;
        if (std::abs(v - yl) <= th)
          r.set(y, x, lip);
        else if (open && inner && v > yl + th && v <= yl + th + kMouthGap)
          r.set(y, x, cavity);
      }
    }

    if (bit(9) > 0.0) {
      const double ycorner = mouth_curve_y(xc + wdt / 2, xc, yc, wdt, curve);
      fill_ellipse(r, xc - wdt / 2 - 0.022, ycorner, kDimpleRadius,
                   kDimpleRadius, dark);
      fill_ellipse(r, xc + wdt / 2 + 0.022, ycorner, kDimpleRadius,
                   kDimpleRadius, dark);
    }
  }

  // Style pipeline: multiplicative texture, then contrast about mid-gray,
  // then the warm/cool tint, then the additive brightness.  Brightness last
  // keeps a brightness-only edit an exact uniform shift of the pre-clamp
  // image.
  const std::uint64_t tex_seed = style_texture_seed(style);
  const double theta = 0.30 * kPi;
  const double phase = 2.0 * kPi * style.background_hue;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double m = 1.0;
      if (style.texture_kind == TextureKind::stripes) {
        const double u = (x + 0.5) / width, v = (y + 0.5) / height;
        const double proj = u * std::cos(theta) + v * std::sin(theta);
        m = 1.0 + style.texture_strength * std::sin(2.0 * kPi * 9.0 * proj +
                                                    phase);
      } else if (style.texture_kind == TextureKind::speckle) {
        m = 1.0 + style.texture_strength *
                      (2.0 * hash_unit(tex_seed, static_cast<std::uint64_t>(y),
                                       static_cast<std::uint64_t>(x)) -
                       1.0);
      }
      const double noise =
          kFrameNoise *
          (2.0 * hash_unit(frame_seed, static_cast<std::uint64_t>(y),
                           static_cast<std::uint64_t>(x)) -
           1.0);
      for (int ch = 0; ch < 3; ++ch) {
        double c = buf[(ch * height + y) * width + x];
        c *= m;
        c = (c - 0.5) * style.contrast + 0.5;
        if (ch == 0) c *= 1.0 + 0.25 * style.tint;
        if (ch == 2) c *= 1.0 - 0.25 * style.tint;
        c += style.brightness + noise;
        buf[(ch * height + y) * width + x] = c;
      }
    }

  Tensor<float> out({3, height, width});
  for (std::size_t i = 0; i < buf.size(); ++i)
    out.data()[i] = static_cast<float>(buf[i]);
  return out;
}

Tensor<float> render_face(const AULabelVector& au, const IdentitySpec& id,
                          const DomainStyleSpec& style,
                          std::uint64_t frame_seed, std::size_t height,
                          std::size_t width) {
  Tensor<float> img =
      render_face_linear(au, id, style, frame_seed, height, width);
  for (std::size_t i = 0; i < img.numel(); ++i)
    img.data()[i] = std::clamp(img.data()[i], 0.0f, 1.0f);
  return img;
}

std::pair<Tensor<float>, Tensor<float>> oracle_swap(const ToyFaceSample& s,
                                                    const ToyFaceSample& t) {
  if (s.style.domain_id == t.style.domain_id)
    throw std::invalid_argument(
        "oracle_swap: samples must come from different domains");
  if (s.au.size() != t.au.size())
    throw std::invalid_argument("oracle_swap: AU vector sizes differ");
  if (s.image.rank() != 3 || s.image.dim(0) != 3 ||
      !s.image.same_shape(t.image))
    throw std::invalid_argument(
        "oracle_swap: samples must carry rendered [3,H,W] images of equal "
        "size");
  const std::size_t height = s.image.dim(1), width = s.image.dim(2);
  Tensor<float> st =
      render_face(t.au, s.identity, s.style, s.frame_seed, height, width);
  Tensor<float> ts =
      render_face(s.au, t.identity, t.style, t.frame_seed, height, width);
  return {std::move(st), std::move(ts)};
}

IdentitySpec sample_identity(int identity_id, std::uint64_t seed) {
  Rng rng(seed);
  IdentitySpec id;
  id.identity_id = identity_id;
  id.face_rx = rng.uniform(0.26, 0.34);
  id.face_ry = rng.uniform(0.32, 0.40);
  id.eye_spacing = rng.uniform(0.20, 0.30);
  id.eye_height = rng.uniform(0.46, 0.50);
  id.eye_rx = rng.uniform(0.030, 0.042);
  id.eye_aperture = rng.uniform(0.014, 0.022);
  id.brow_height = rng.uniform(0.29, 0.34);
  id.mouth_width = rng.uniform(0.18, 0.28);
  id.mouth_height = rng.uniform(0.72, 0.78);
  id.skin_r = rng.uniform(0.65, 0.85);
  id.skin_g = rng.uniform(0.50, 0.70);
  id.skin_b = rng.uniform(0.40, 0.60);
  return id;
}

// The two domains are separated on every style axis at once: disjoint hue
// bands, different texture families, and non-overlapping brightness,
// contrast, and tint ranges.
DomainStyleSpec sample_style(Domain d, std::uint64_t seed) {
  Rng rng(seed);
  DomainStyleSpec st;
  st.domain_id = d;
  if (d == Domain::source) {
    st.background_hue = rng.uniform(0.55, 0.68);
    st.brightness = rng.uniform(-0.05, 0.05);
    st.contrast = rng.uniform(0.95, 1.15);
    st.tint = rng.uniform(0.30, 0.60);
    st.texture_kind = TextureKind::stripes;
    st.texture_strength = rng.uniform(0.08, 0.18);
  } else {
    st.background_hue = rng.uniform(0.02, 0.15);
    st.brightness = rng.uniform(0.08, 0.18);
    st.contrast = rng.uniform(0.70, 0.88);
    st.tint = rng.uniform(-0.60, -0.30);
    st.texture_kind = TextureKind::speckle;
    st.texture_strength = rng.uniform(0.18, 0.30);
  }
  return st;
}

AULabelVector sample_au(const std::vector<double>& marginals,
                        std::uint64_t seed) {
  if (marginals.size() < kMinAU || marginals.size() > kMaxAU)
    throw std::invalid_argument("sample_au: marginal count out of range [3,10]");
  for (double p : marginals)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("sample_au: marginal outside [0,1]");
  Rng rng(seed);
  AULabelVector au;
  au.bits.resize(marginals.size());
  for (std::size_t k = 0; k < marginals.size(); ++k)
    au.bits[k] = rng.bernoulli(marginals[k]) ? 1 : 0;
  return au;
}

}  // namespace auda
