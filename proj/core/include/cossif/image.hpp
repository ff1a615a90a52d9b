#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cossif {

/// An 8-bit RGB raster, interleaved row-major. Decoding normalizes every
/// input to this layout: grayscale is replicated across the three channels,
/// an alpha channel is dropped.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3, [r, g, b] per pixel

  std::uint8_t at(int x, int y, int channel) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + channel)];
  }
  std::uint8_t& at(int x, int y, int channel) {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + channel)];
  }
};

/// Decodes a PNG or JPEG file. Throws DataError when the file is missing,
/// truncated, or not a supported raster.
Image decode_image(const std::filesystem::path& path);

/// Writes `image` as a PNG. Byte-deterministic for identical pixel content.
void write_png(const Image& image, const std::filesystem::path& path);

/// Bilinear resample to side x side. Output pixel (x, y) samples the source
/// at sx = (x + 0.5) * (src_w / side) - 0.5 (same for y), clamped to the
/// source rectangle, linearly interpolating the four surrounding pixels and
/// rounding to nearest. Equal-size inputs come back pixel-identical.
Image rescale(const Image& image, int side = 64);

/// A flattened, normalized image: R plane, then G, then B, each row-major,
/// every value raw/255 in [0, 1]. dim() == 3 * side^2.
struct PixelVector {
  std::string image_id;
  int side = 0;
  std::vector<float> values;

  int dim() const { return 3 * side * side; }
};

/// Flattens a square raster into a PixelVector. Throws DataError if the
/// image is not square.
PixelVector vectorize(const Image& image, std::string image_id);

/// True when every component is zero (an all-black image); such a vector has
/// no direction and cannot enter a cosine similarity.
bool is_zero_vector(const PixelVector& v);

}  // namespace cossif
