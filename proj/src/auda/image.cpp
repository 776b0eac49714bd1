#include "auda/image.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace auda {

namespace {

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::uint8_t* data, std::size_t len) {
  put_u32be(out, static_cast<std::uint32_t>(len));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  if (len) out.insert(out.end(), data, data + len);
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + start, static_cast<uInt>(4 + len));
  put_u32be(out, crc);
}

std::uint8_t paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

ImageU8 make_image(std::size_t width, std::size_t height, std::uint8_t fill) {
  ImageU8 img;
  img.width = width;
  img.height = height;
  img.rgb.assign(width * height * 3, fill);
  return img;
}

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  if (img.width == 0 || img.height == 0 ||
      img.rgb.size() != img.width * img.height * 3)
    throw std::invalid_argument("encode_png: inconsistent image buffer");

  // raw scanlines, filter byte 0 per row
  const std::size_t stride = img.width * 3;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(raw.data() + y * (stride + 1) + 1, img.rgb.data() + y * stride,
                stride);
  }

  uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_cap);
  if (compress2(comp.data(), &comp_cap, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("encode_png: zlib compression failed");
  comp.resize(comp_cap);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kSignature, kSignature + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  put_chunk(out, "IHDR", ihdr, 13);
  put_chunk(out, "IDAT", comp.data(), comp.size());
  put_chunk(out, "IEND", nullptr, 0);
  return out;
}

ImageU8 decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
    throw std::runtime_error("decode_png: not a PNG stream");

  std::size_t pos = 8;
  bool have_ihdr = false;
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= bytes.size()) {
    std::uint32_t len = get_u32be(bytes.data() + pos);
    if (pos + 12 + len > bytes.size())
      throw std::runtime_error("decode_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("decode_png: bad IHDR");
      width = get_u32be(data);
      height = get_u32be(data + 4);
      if (data[8] != 8 || data[9] != 2 || data[10] != 0 || data[11] != 0 ||
          data[12] != 0)
        throw std::runtime_error(
            "decode_png: only 8-bit RGB non-interlaced supported");
      have_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!have_ihdr || width == 0 || height == 0)
    throw std::runtime_error("decode_png: missing IHDR");

  const std::size_t stride = width * 3;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw std::runtime_error("decode_png: zlib inflate failed");

  ImageU8 img = make_image(width, height);
  std::vector<std::uint8_t> prior(stride, 0);
  for (std::size_t y = 0; y < height; ++y) {
    std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = img.rgb.data() + y * stride;
    for (std::size_t i = 0; i < stride; ++i) {
      int a = i >= 3 ? dst[i - 3] : 0;
      int b = prior[i];
      int c = i >= 3 ? prior[i - 3] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default:
          throw std::runtime_error("decode_png: unknown scanline filter");
      }
      dst[i] = static_cast<std::uint8_t>(v);
    }
    std::memcpy(prior.data(), dst, stride);
  }
  return img;
}

void save_png(const std::string& path, const ImageU8& img) {
  auto bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_png: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("save_png: write failed for " + path);
}

ImageU8 load_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_png: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

ImageU8 quantize(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3)
    throw std::invalid_argument("quantize: expected [3,H,W], got " +
                                shape_str(chw.shape()));
  const std::size_t h = chw.dim(1), w = chw.dim(2);
  ImageU8 img = make_image(w, h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        float v = chw[(c * h + y) * w + x];
        v = std::min(1.0f, std::max(0.0f, v));
        img.at(y, x, c) =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  return img;
}

Tensor<float> dequantize(const ImageU8& img) {
  Tensor<float> t({3, img.height, img.width});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        t[(c * img.height + y) * img.width + x] =
            static_cast<float>(img.at(y, x, c)) / 255.0f;
  return t;
}

ImageU8 compose_grid(const std::vector<ImageU8>& tiles, std::size_t rows,
                     std::size_t cols, std::size_t pad,
                     std::uint8_t pad_value) {
  if (tiles.empty() || rows * cols < tiles.size())
    throw std::invalid_argument("compose_grid: grid smaller than tile count");
  const std::size_t tw = tiles[0].width, th = tiles[0].height;
  for (const auto& t : tiles)
    if (t.width != tw || t.height != th)
      throw std::invalid_argument("compose_grid: tiles differ in size");
  ImageU8 canvas =
      make_image(cols * tw + (cols + 1) * pad, rows * th + (rows + 1) * pad,
                 pad_value);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    std::size_t r = i / cols, c = i % cols;
    std::size_t oy = pad + r * (th + pad), ox = pad + c * (tw + pad);
    for (std::size_t y = 0; y < th; ++y)
      for (std::size_t x = 0; x < tw; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch)
          canvas.at(oy + y, ox + x, ch) = tiles[i].at(y, x, ch);
  }
  return canvas;
}

}  // namespace auda
