#ifndef SAMP_IMAGE_HPP
#define SAMP_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace samp {

// 8-bit raster, interleaved pixels, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::uint8_t at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

// Single-channel float raster.
struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<float> v;

    float& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

ImageU8 make_image(int width, int height, int channels, std::uint8_t fill = 0);

// BT.601 luminance in [0,1].
ImageF to_luminance(const ImageU8& img);

// Bilinear resample with half-pixel centers: src = (dst + 0.5) * scale - 0.5,
// clamped at the borders.
ImageF resize_bilinear(const ImageF& src, int out_w, int out_h);

// Minimal PNG codec on top of zlib. Writer emits 8-bit gray or RGB,
// filter type 0 rows. Reader accepts non-interlaced 8-bit gray / RGB / RGBA
// (alpha is dropped) and rejects everything else with a ValidationError.
std::vector<std::uint8_t> encode_png(const ImageU8& img);
void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

} // namespace samp

#endif
