#pragma once
// 8-bit RGB images and PNG serialization.
//
// The writer always emits the same byte stream for the same pixels (8-bit
// RGB, filter 0, fixed zlib level), which is what makes dataset directories
// checksum-stable.  The reader understands any 8-bit RGB non-interlaced PNG
// including all five scanline filters.

#include <cstdint>
#include <string>
#include <vector>

#include "auda/tensor.hpp"

namespace auda {

struct ImageU8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row major

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return rgb[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return rgb[(y * width + x) * 3 + c];
  }
};

ImageU8 make_image(std::size_t width, std::size_t height,
                   std::uint8_t fill = 0);

std::vector<std::uint8_t> encode_png(const ImageU8& img);
ImageU8 decode_png(const std::vector<std::uint8_t>& bytes);

void save_png(const std::string& path, const ImageU8& img);
ImageU8 load_png(const std::string& path);

// Planar float [3,H,W] in [0,1] <-> interleaved bytes.  Quantization is
// round-to-nearest on the clamped value, so render -> quantize -> load is a
// fixed point.
ImageU8 quantize(const Tensor<float>& chw);
Tensor<float> dequantize(const ImageU8& img);

// Lays tiles out row major into one canvas with `pad` pixels of spacing.
// All tiles must share one size.
ImageU8 compose_grid(const std::vector<ImageU8>& tiles, std::size_t rows,
                     std::size_t cols, std::size_t pad = 2,
                     std::uint8_t pad_value = 32);

}  // namespace auda
