#pragma once
// The adaptation network: one shared action-unit encoder, two private
// domain-style encoders, a shared decoder that re-injects the style vector
// at every spatial scale, two private patch discriminators, a linear AU
// probe, and the contrastive projection head.
//
// The generator-side and discriminator-side parameters live in separate
// stores because training alternates between the two groups.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "auda/domain.hpp"
#include "auda/nn.hpp"
#include "auda/ops_losses.hpp"

namespace auda {

struct ModelConfig {
  std::size_t num_au = 5;       // K
  std::size_t d_au = 64;
  std::size_t d_dm = 64;
  std::size_t d_proj = 32;
  std::size_t image_size = 64;  // the conv plans assume 64

  void validate() const {
    if (num_au < 1 || num_au > 16)
      throw std::invalid_argument("ModelConfig: num_au out of range [1,16]");
    if (image_size != 64)
      throw std::invalid_argument(
          "ModelConfig: image_size must be 64 (conv plans are fixed)");
    if ((d_au + d_dm) % 16 != 0)
      throw std::invalid_argument(
          "ModelConfig: d_au + d_dm must be divisible by 16 to form the 4x4 "
          "decoder seed");
    if (d_au == 0 || d_dm == 0 || d_proj == 0)
      throw std::invalid_argument("ModelConfig: zero feature width");
  }
};

// Patch discriminators decide realness on an 8x8 grid of overlapping
// receptive fields for 64x64 inputs.
inline constexpr std::size_t kPatchGrid = 8;

// Bumped whenever the parameter layout changes; checkpoints refuse to load
// across versions.
inline constexpr int kModelVersion = 1;

namespace detail {

template <typename T>
void check_images(const Var<T>& x, std::size_t s, const char* who) {
  const Shape& sh = x->value.shape();
  if (sh.size() != 4 || sh[1] != 3 || sh[2] != s || sh[3] != s)
    throw std::invalid_argument(std::string(who) +
                                ": expected image batch [B,3," +
                                std::to_string(s) + "," + std::to_string(s) +
                                "], got " + shape_str(sh));
  if (sh[0] == 0)
    throw std::invalid_argument(std::string(who) + ": empty batch");
}

}  // namespace detail

// Eight 3x3 convolutions with stride-2 downsampling at four depths, global
// average pooling into a d-dimensional vector.  Weight count sits a little
// under a third of a million at the default width.
template <typename T>
struct ConvEncoder {
  std::vector<Conv2dLayer<T>> convs;
  T slope = T(0.2);

  ConvEncoder() = default;
  ConvEncoder(ParamStore<T>& store, const std::string& name, std::size_t d_out,
              std::uint64_t seed) {
    const std::size_t ch[9] = {3, 16, 24, 32, 48, 64, 96, 144, d_out};
    const std::size_t strides[8] = {2, 2, 1, 2, 1, 2, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) {
      std::string lname = name + ".conv" + std::to_string(i + 1);
      convs.emplace_back(store, lname, ch[i], ch[i + 1], 3, strides[i], 1,
                         derive_seed(seed, ("init." + lname).c_str()), slope);
    }
  }

  Var<T> operator()(Var<T> x) const {
    for (const auto& c : convs) x = leaky_relu(c(x), slope);
    return global_avg_pool(x);
  }
};

// Decoder from a 4x4 seed built out of [au, dm]; the style vector is
// broadcast and concatenated again at each of the five spatial scales.
template <typename T>
struct StyleDecoder {
  Conv2dLayer<T> c1, c2, c3, c4, c5, c6, c7;
  std::size_t d_au = 0, d_dm = 0;
  T slope = T(0.2);

  StyleDecoder() = default;
  StyleDecoder(ParamStore<T>& store, const std::string& name, std::size_t dau,
               std::size_t ddm, std::uint64_t seed)
      : d_au(dau), d_dm(ddm) {
    const std::size_t seed_ch = (dau + ddm) / 16;
    auto s = [&](const char* l) {
      return derive_seed(seed, ("init." + std::string(l)).c_str());
    };
    c1 = Conv2dLayer<T>(store, name + ".c1", seed_ch + ddm, 96, 3, 1, 1,
                        s("dec.c1"), slope);
    c2 = Conv2dLayer<T>(store, name + ".c2", 96 + ddm, 64, 3, 1, 1,
                        s("dec.c2"), slope);
    c3 = Conv2dLayer<T>(store, name + ".c3", 64 + ddm, 32, 3, 1, 1,
                        s("dec.c3"), slope);
    c4 = Conv2dLayer<T>(store, name + ".c4", 32 + ddm, 16, 3, 1, 1,
                        s("dec.c4"), slope);
    c5 = Conv2dLayer<T>(store, name + ".c5", 16 + ddm, 16, 1, 1, 0,
                        s("dec.c5"), slope);
    c6 = Conv2dLayer<T>(store, name + ".c6", 16, 16, 3, 1, 1, s("dec.c6"),
                        slope);
    c7 = Conv2dLayer<T>(store, name + ".c7", 16, 3, 3, 1, 1, s("dec.c7"),
                        slope);
  }

  Var<T> operator()(const Var<T>& au, const Var<T>& dm) const {
    const Shape& sa = au->value.shape();
    const Shape& sd = dm->value.shape();
    if (sa.size() != 2 || sa[1] != d_au)
      throw std::invalid_argument("decode: au features must be [B," +
                                  std::to_string(d_au) + "], got " +
                                  shape_str(sa));
    if (sd.size() != 2 || sd[1] != d_dm)
      throw std::invalid_argument("decode: domain features must be [B," +
                                  std::to_string(d_dm) + "], got " +
                                  shape_str(sd));
    if (sa[0] != sd[0])
      throw std::invalid_argument("decode: au/domain batch sizes differ");
    const std::size_t B = sa[0];
    auto inject = [&](const Var<T>& x, std::size_t hw) {
      return concat_axis1(x, broadcast_to_map(dm, hw, hw));
    };
    auto seed_map =
        reshape(concat_axis1(au, dm), {B, (d_au + d_dm) / 16, 4, 4});
    auto x = leaky_relu(c1(inject(seed_map, 4)), slope);
    x = leaky_relu(c2(inject(upsample_nearest2(x), 8)), slope);
    x = leaky_relu(c3(inject(upsample_nearest2(x), 16)), slope);
    x = leaky_relu(c4(inject(upsample_nearest2(x), 32)), slope);
    x = leaky_relu(c5(inject(upsample_nearest2(x), 64)), slope);
    x = leaky_relu(c6(x), slope);
    return sigmoid(c7(x));
  }
};

// Three stride-2 kernel-4 convolutions followed by a 3x3 scoring head; the
// output is a kPatchGrid x kPatchGrid map of per-patch realness in (0,1).
template <typename T>
struct PatchDiscriminator {
  Conv2dLayer<T> d1, d2, d3, d4;
  T slope = T(0.2);

  PatchDiscriminator() = default;
  PatchDiscriminator(ParamStore<T>& store, const std::string& name,
                     std::uint64_t seed) {
    auto s = [&](const std::string& l) {
      return derive_seed(seed, ("init." + name + "." + l).c_str());
    };
    d1 = Conv2dLayer<T>(store, name + ".d1", 3, 16, 4, 2, 1, s("d1"), slope);
    d2 = Conv2dLayer<T>(store, name + ".d2", 16, 32, 4, 2, 1, s("d2"), slope);
    d3 = Conv2dLayer<T>(store, name + ".d3", 32, 64, 4, 2, 1, s("d3"), slope);
    d4 = Conv2dLayer<T>(store, name + ".d4", 64, 1, 3, 1, 1, s("d4"), slope);
  }

  Var<T> operator()(Var<T> x) const {
    x = leaky_relu(d1(x), slope);
    x = leaky_relu(d2(x), slope);
    x = leaky_relu(d3(x), slope);
    return sigmoid(d4(x));
  }
};

template <typename T>
struct Model {
  ModelConfig cfg;
  int version = kModelVersion;
  ParamStore<T> gen_params;   // encoders, decoder, AU probe, projector
  ParamStore<T> disc_params;  // both patch discriminators

  ConvEncoder<T> enc_au;
  ConvEncoder<T> enc_dm_s, enc_dm_t;
  StyleDecoder<T> dec;
  PatchDiscriminator<T> disc_s, disc_t;
  LinearLayer<T> au_head;
  LinearLayer<T> proj_hidden, proj_out;

  static Model init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.enc_au = ConvEncoder<T>(m.gen_params, "enc_au", cfg.d_au,
                              derive_seed(seed, "enc_au"));
    m.enc_dm_s = ConvEncoder<T>(m.gen_params, "enc_dm_s", cfg.d_dm,
                                derive_seed(seed, "enc_dm_s"));
    m.enc_dm_t = ConvEncoder<T>(m.gen_params, "enc_dm_t", cfg.d_dm,
                                derive_seed(seed, "enc_dm_t"));
    m.dec = StyleDecoder<T>(m.gen_params, "dec", cfg.d_au, cfg.d_dm,
                            derive_seed(seed, "dec"));
    m.au_head = LinearLayer<T>(m.gen_params, "au_head", cfg.d_au, cfg.num_au,
                               derive_seed(seed, "init.au_head"));
    m.proj_hidden = LinearLayer<T>(
        m.gen_params, "proj.hidden", cfg.d_au + cfg.d_dm,
        (cfg.d_au + cfg.d_dm) / 2, derive_seed(seed, "init.proj.hidden"));
    m.proj_out = LinearLayer<T>(m.gen_params, "proj.out",
                                (cfg.d_au + cfg.d_dm) / 2, cfg.d_proj,
                                derive_seed(seed, "init.proj.out"));
    m.disc_s = PatchDiscriminator<T>(m.disc_params, "disc_s",
                                     derive_seed(seed, "disc_s"));
    m.disc_t = PatchDiscriminator<T>(m.disc_params, "disc_t",
                                     derive_seed(seed, "disc_t"));
    return m;
  }

  // [B,3,S,S] -> [B,d_au]; one parameter set regardless of where the batch
  // came from
  Var<T> encode_au(const Var<T>& images) const {
    detail::check_images(images, cfg.image_size, "encode_au");
    return enc_au(images);
  }

  Var<T> encode_domain(const Var<T>& images, Domain d) const {
    detail::check_images(images, cfg.image_size, "encode_domain");
    return d == Domain::source ? enc_dm_s(images) : enc_dm_t(images);
  }

  Var<T> decode(const Var<T>& au_feat, const Var<T>& dm_feat) const {
    return dec(au_feat, dm_feat);
  }

  Var<T> discriminate(const Var<T>& images, Domain d) const {
    detail::check_images(images, cfg.image_size, "discriminate");
    return d == Domain::source ? disc_s(images) : disc_t(images);
  }

  // [B,d_au] -> per-AU probabilities [B,K]
  Var<T> predict_au(const Var<T>& au_feat) const {
    const Shape& s = au_feat->value.shape();
    if (s.size() != 2 || s[1] != cfg.d_au)
      throw std::invalid_argument("predict_au: expected [B," +
                                  std::to_string(cfg.d_au) + "], got " +
                                  shape_str(s));
    return sigmoid(au_head(au_feat));
  }

  // Contrastive embedding of one image's (au, dm) pair; unit-norm rows.
  Var<T> project(const Var<T>& au_feat, const Var<T>& dm_feat) const {
    auto h = leaky_relu(proj_hidden(concat_axis1(au_feat, dm_feat)), T(0.2));
    return row_l2_normalize(proj_out(h));
  }
};

}  // namespace auda
