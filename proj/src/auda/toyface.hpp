#pragma once
// Procedural toy faces with three independent generative factors:
//
//   * AU bits          - localized geometric strokes (brows, eyes, mouth)
//   * identity         - face geometry and skin color, constant per subject
//   * domain style     - global background/texture/color transform
//
// The factorization is exact by construction: every AU bit only touches
// pixels inside a declared horizontal band, and style only enters the
// per-pixel color pipeline after geometry is rasterized.  That gives the
// training stack a ground-truth oracle for AU-swapped images.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "auda/domain.hpp"
#include "auda/tensor.hpp"

namespace auda {

inline constexpr int kGeneratorVersion = 1;

struct AULabelVector {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  void validate() const;
};

inline constexpr std::size_t kMinAU = 3, kMaxAU = 10;

// Geometry ranges are normalized to the unit square; documented as the
// [min,max] pairs below and enforced by validate().
struct IdentitySpec {
  int identity_id = 0;
  double face_rx = 0.30;      // [0.26, 0.34]
  double face_ry = 0.36;      // [0.32, 0.40]
  double eye_spacing = 0.25;  // [0.20, 0.30] distance between eye centers
  double eye_height = 0.48;   // [0.46, 0.50] eye row
  double eye_rx = 0.036;      // [0.030, 0.042]
  double eye_aperture = 0.018;  // [0.014, 0.022] vertical semi-axis
  double brow_height = 0.32;  // [0.29, 0.34]
  double mouth_width = 0.23;  // [0.18, 0.28]
  double mouth_height = 0.75;  // [0.72, 0.78] mouth row
  double skin_r = 0.75, skin_g = 0.60, skin_b = 0.50;  // r [0.65,0.85],
                                                       // g [0.50,0.70],
                                                       // b [0.40,0.60]
  void validate() const;
};

enum class TextureKind { stripes, speckle, flat };

const char* texture_kind_name(TextureKind k);
TextureKind texture_kind_from_name(const std::string& name);

struct DomainStyleSpec {
  Domain domain_id = Domain::source;
  double background_hue = 0.6;   // [0,1) hue wheel
  double brightness = 0.0;       // [-0.3, 0.3] additive, applied last
  double contrast = 1.0;         // [0.5, 1.5]
  double tint = 0.0;             // [-1, 1] warm/cool channel balance
  TextureKind texture_kind = TextureKind::flat;
  double texture_strength = 0.0;  // [0, 0.5]

  void validate() const;
};

struct ToyFaceSample {
  Tensor<float> image;  // [3,H,W] clamped to [0,1]
  AULabelVector au;
  IdentitySpec identity;
  DomainStyleSpec style;
  std::uint64_t frame_seed = 0;
};

// Analytic feature positions (normalized coordinates, neutral AU state).
// Style never enters; that is the point.
struct Landmarks {
  double eye_left[2], eye_right[2];
  double brow_left[2], brow_right[2];
  double mouth_center[2], mouth_left[2], mouth_right[2];
};

Landmarks landmarks(const IdentitySpec& identity);

// Horizontal pixel band (rows [y0, y1), all columns) that AU bit k is
// allowed to modify.
struct RegionMask {
  std::size_t y0 = 0, y1 = 0;
};

RegionMask region_mask(std::size_t au_bit, std::size_t height);

// Rasterizes the face.  The _linear variant returns the pre-clamp image so
// tests can verify that style edits are exact affine maps; render_face is
// the clamped version everything else consumes.
Tensor<float> render_face_linear(const AULabelVector& au,
                                 const IdentitySpec& identity,
                                 const DomainStyleSpec& style,
                                 std::uint64_t frame_seed, std::size_t height,
                                 std::size_t width);
Tensor<float> render_face(const AULabelVector& au, const IdentitySpec& identity,
                          const DomainStyleSpec& style,
                          std::uint64_t frame_seed, std::size_t height,
                          std::size_t width);

// Ground-truth AU swap: the images a perfect cross-domain synthesis would
// produce.  image_st carries the target's AU bits on the source's identity,
// style, and frame conditions; image_ts the converse.  Output size follows
// the samples' own images, which must agree.
std::pair<Tensor<float>, Tensor<float>> oracle_swap(const ToyFaceSample& s,
                                                    const ToyFaceSample& t);

// Factor samplers; each is a pure function of its seed.
IdentitySpec sample_identity(int identity_id, std::uint64_t seed);
DomainStyleSpec sample_style(Domain d, std::uint64_t seed);
AULabelVector sample_au(const std::vector<double>& marginals,
                        std::uint64_t seed);

}  // namespace auda
