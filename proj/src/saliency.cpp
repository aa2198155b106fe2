#include "samp/saliency.hpp"
#include "samp/common.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace samp {

namespace {

using cd = std::complex<double>;

// Iterative radix-2 FFT; the working grid is a power of two.
void fft_inplace(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw NumericError("fft: length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        cd wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

void fft2d(std::vector<cd>& grid, int n, bool inverse) {
    std::vector<cd> line(static_cast<std::size_t>(n));
    for (int y = 0; y < n; ++y) {
        std::copy_n(grid.begin() + static_cast<std::size_t>(y) * n, n, line.begin());
        fft_inplace(line, inverse);
        std::copy_n(line.begin(), n, grid.begin() + static_cast<std::size_t>(y) * n);
    }
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) line[y] = grid[static_cast<std::size_t>(y) * n + x];
        fft_inplace(line, inverse);
        for (int y = 0; y < n; ++y) grid[static_cast<std::size_t>(y) * n + x] = line[y];
    }
}

std::vector<double> mean_filter_3x3(const std::vector<double>& in, int n) {
    std::vector<double> out(in.size());
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double sum = 0.0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                int yy = y + dy;
                if (yy < 0 || yy >= n) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = x + dx;
                    if (xx < 0 || xx >= n) continue;
                    sum += in[static_cast<std::size_t>(yy) * n + xx];
                    ++count;
                }
            }
            out[static_cast<std::size_t>(y) * n + x] = sum / count;
        }
    }
    return out;
}

// Separable Gaussian with border-tap renormalization; per-row weight sums
// depend only on the column (and vice versa), so this equals the direct
// renormalized 2-D filter up to floating-point order.
std::vector<double> gaussian_blur(const std::vector<double>& in, int n, double sigma, int radius) {
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int d = -radius; d <= radius; ++d)
        kernel[d + radius] = std::exp(-0.5 * d * d / (sigma * sigma));

    std::vector<double> tmp(in.size()), out(in.size());
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double sum = 0.0, weight = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int xx = x + d;
                if (xx < 0 || xx >= n) continue;
                sum += kernel[d + radius] * in[static_cast<std::size_t>(y) * n + xx];
                weight += kernel[d + radius];
            }
            tmp[static_cast<std::size_t>(y) * n + x] = sum / weight;
        }
    }
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            double sum = 0.0, weight = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                int yy = y + d;
                if (yy < 0 || yy >= n) continue;
                sum += kernel[d + radius] * tmp[static_cast<std::size_t>(yy) * n + x];
                weight += kernel[d + radius];
            }
            out[static_cast<std::size_t>(y) * n + x] = sum / weight;
        }
    }
    return out;
}

} // namespace

SaliencyMap spectral_residual(const ImageF& image, const SpectralResidualOptions& opt) {
    if (image.width <= 0 || image.height <= 0) throw ValidationError("spectral_residual: empty image");
    const int n = opt.working_size;
    if (n < 4 || (n & (n - 1)) != 0)
        throw ValidationError("spectral_residual: working size must be a power of two >= 4");

    ImageF small = resize_bilinear(image, n, n);

    float lo = small.v[0], hi = small.v[0];
    for (float v : small.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    SaliencyMap result;
    result.height = image.height;
    result.width = image.width;
    if (hi - lo <= 1e-12f) {
        // Degenerate constant input; the normalization of a constant field is
        // defined as all zeros.
        result.v.assign(static_cast<std::size_t>(image.width) * image.height, 0.0f);
        return result;
    }

    std::vector<cd> spectrum(static_cast<std::size_t>(n) * n);
    for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] = cd(small.v[i], 0.0);
    fft2d(spectrum, n, false);

    constexpr double kEps = 1e-8;
    std::vector<double> log_amp(spectrum.size());
    std::vector<double> phase(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        log_amp[i] = std::log(std::abs(spectrum[i]) + kEps);
        phase[i] = std::arg(spectrum[i]);
    }

    std::vector<double> smooth = mean_filter_3x3(log_amp, n);
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        double residual = log_amp[i] - smooth[i];
        spectrum[i] = std::polar(std::exp(residual), phase[i]);
    }
    fft2d(spectrum, n, true);

    std::vector<double> sal(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) sal[i] = std::norm(spectrum[i]);
    sal = gaussian_blur(sal, n, opt.blur_sigma, opt.blur_radius);

    double mn = sal[0], mx = sal[0];
    for (double v : sal) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    ImageF norm;
    norm.width = n;
    norm.height = n;
    norm.v.resize(sal.size());
    if (mx - mn <= 0.0) {
        std::fill(norm.v.begin(), norm.v.end(), 0.0f);
    } else {
        for (std::size_t i = 0; i < sal.size(); ++i)
            norm.v[i] = static_cast<float>((sal[i] - mn) / (mx - mn));
    }

    ImageF full = resize_bilinear(norm, image.width, image.height);
    result.v = std::move(full.v);
    // bilinear interpolation of [0,1] data stays in [0,1]; clamp rounding dust
    for (float& v : result.v) v = std::clamp(v, 0.0f, 1.0f);
    return result;
}

SaliencyMap spectral_residual(const ImageU8& image, const SpectralResidualOptions& opt) {
    return spectral_residual(to_luminance(image), opt);
}

SaliencyGrid downsample_max(const SaliencyMap& map, int sal_h, int sal_w) {
    if (sal_h <= 0 || sal_w <= 0) throw ValidationError("downsample_max: target size must be positive");
    if (map.height <= 0 || map.width <= 0) throw ValidationError("downsample_max: empty map");

    const SaliencyMap* src = &map;
    SaliencyMap resized;
    if (map.height % sal_h != 0 || map.width % sal_w != 0) {
        int new_h = ((map.height + sal_h - 1) / sal_h) * sal_h;
        int new_w = ((map.width + sal_w - 1) / sal_w) * sal_w;
        ImageF tmp;
        tmp.width = map.width;
        tmp.height = map.height;
        tmp.v = map.v;
        ImageF r = resize_bilinear(tmp, new_w, new_h);
        resized.height = new_h;
        resized.width = new_w;
        resized.v = std::move(r.v);
        for (float& v : resized.v) v = std::clamp(v, 0.0f, 1.0f);
        src = &resized;
    }

    const int bh = src->height / sal_h;
    const int bw = src->width / sal_w;
    SaliencyGrid grid;
    grid.height = sal_h;
    grid.width = sal_w;
    grid.v.resize(static_cast<std::size_t>(sal_h) * sal_w);
    for (int y = 0; y < sal_h; ++y) {
        for (int x = 0; x < sal_w; ++x) {
            float m = 0.0f;
            for (int dy = 0; dy < bh; ++dy) {
                for (int dx = 0; dx < bw; ++dx) {
                    m = std::max(m, src->at(y * bh + dy, x * bw + dx));
                }
            }
            grid.v[static_cast<std::size_t>(y) * sal_w + x] = m;
        }
    }
    return grid;
}

ImageU8 saliency_to_png_image(const SaliencyMap& map) {
    ImageU8 img = make_image(map.width, map.height, 1);
    for (std::size_t i = 0; i < map.v.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * map.v[i]));
    return img;
}

} // namespace samp
