#include "samp/image.hpp"
#include "samp/common.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace samp {

ImageU8 make_image(int width, int height, int channels, std::uint8_t fill) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
        throw ValidationError("make_image: bad dimensions");
    ImageU8 img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(width) * height * channels, fill);
    return img;
}

ImageF to_luminance(const ImageU8& img) {
    if (img.width <= 0 || img.height <= 0) throw ValidationError("to_luminance: empty image");
    ImageF out;
    out.width = img.width;
    out.height = img.height;
    out.v.resize(static_cast<std::size_t>(img.width) * img.height);
    const float inv = 1.0f / 255.0f;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.channels == 1) {
                out.at(y, x) = img.at(y, x, 0) * inv;
            } else {
                float r = img.at(y, x, 0) * inv;
                float g = img.at(y, x, 1) * inv;
                float b = img.at(y, x, 2) * inv;
                out.at(y, x) = 0.299f * r + 0.587f * g + 0.114f * b;
            }
        }
    }
    return out;
}

ImageF resize_bilinear(const ImageF& src, int out_w, int out_h) {
    if (src.width <= 0 || src.height <= 0) throw ValidationError("resize_bilinear: empty image");
    if (out_w <= 0 || out_h <= 0) throw ValidationError("resize_bilinear: bad target size");
    if (out_w == src.width && out_h == src.height) return src;

    ImageF out;
    out.width = out_w;
    out.height = out_h;
    out.v.resize(static_cast<std::size_t>(out_w) * out_h);

    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.height - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.width - 1);
            double wx = fx - x0;
            double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
            double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_u32_be(out, crc);
}

const std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
    if (img.width <= 0 || img.height <= 0 || (img.channels != 1 && img.channels != 3))
        throw ValidationError("encode_png: unsupported image");

    std::vector<std::uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);           // color type
    ihdr.push_back(0);                                   // compression
    ihdr.push_back(0);                                   // filter
    ihdr.push_back(0);                                   // interlace

    // filter byte 0 + raw scanline per row
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }

    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw NumericError("write_png: deflate failed");
    comp.resize(comp_cap);

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::string& path, const ImageU8& img) {
    auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ValidationError("write_png: write failed for " + path);
}

ImageU8 read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("read_png: cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
        throw ValidationError("read_png: not a PNG file: " + path);

    int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool seen_ihdr = false, seen_iend = false;
    while (pos + 8 <= buf.size() && !seen_iend) {
        std::uint32_t len = get_u32_be(buf.data() + pos);
        if (pos + 12 + len > buf.size()) throw ValidationError("read_png: truncated chunk in " + path);
        std::string type(reinterpret_cast<const char*>(buf.data() + pos + 4), 4);
        const std::uint8_t* data = buf.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) throw ValidationError("read_png: bad IHDR");
            width = static_cast<int>(get_u32_be(data));
            height = static_cast<int>(get_u32_be(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            interlace = data[12];
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || width <= 0 || height <= 0) throw ValidationError("read_png: missing IHDR in " + path);
    if (bit_depth != 8) throw ValidationError("read_png: only 8-bit PNGs supported: " + path);
    if (interlace != 0) throw ValidationError("read_png: interlaced PNGs not supported: " + path);
    int src_ch;
    switch (color_type) {
        case 0: src_ch = 1; break;
        case 2: src_ch = 3; break;
        case 6: src_ch = 4; break;
        default: throw ValidationError("read_png: unsupported color type in " + path);
    }

    const std::size_t stride = static_cast<std::size_t>(width) * src_ch;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int zr = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zr != Z_OK || raw_len != raw.size()) throw ValidationError("read_png: corrupt image data in " + path);

    // undo per-row filters in place
    std::vector<std::uint8_t> pix(stride * height);
    for (int y = 0; y < height; ++y) {
        std::uint8_t filter = raw[(stride + 1) * y];
        const std::uint8_t* src = raw.data() + (stride + 1) * y + 1;
        std::uint8_t* dst = pix.data() + stride * y;
        const std::uint8_t* up = y > 0 ? pix.data() + stride * (y - 1) : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<std::size_t>(src_ch) ? dst[i - src_ch] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= static_cast<std::size_t>(src_ch)) ? up[i - src_ch] : 0;
            int x = src[i];
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: x += paeth(a, b, c); break;
                default: throw ValidationError("read_png: bad filter type in " + path);
            }
            dst[i] = static_cast<std::uint8_t>(x & 0xff);
        }
    }

    ImageU8 out = make_image(width, height, src_ch == 1 ? 1 : 3);
    if (src_ch == out.channels) {
        out.pixels = std::move(pix);
    } else {
        // RGBA -> RGB
        for (std::size_t p = 0, q = 0; p < pix.size(); p += 4, q += 3) {
            out.pixels[q] = pix[p];
            out.pixels[q + 1] = pix[p + 1];
            out.pixels[q + 2] = pix[p + 2];
        }
    }
    return out;
}

} // namespace samp
