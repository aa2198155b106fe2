#ifndef SAMP_SALIENCY_HPP
#define SAMP_SALIENCY_HPP

#include "samp/image.hpp"
#include "samp/types.hpp"

namespace samp {

// Full-resolution saliency map, values in [0,1].
struct SaliencyMap {
    int height = 0;
    int width = 0;
    std::vector<float> v;

    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

struct SpectralResidualOptions {
    int working_size = 64;   // square working resolution for the spectrum
    double blur_sigma = 3.0; // final Gaussian smoothing
    int blur_radius = 8;
};

// Spectral-residual saliency:
//   1. bilinear resize to working_size^2 (luminance for RGB input)
//   2. 2-D DFT; log amplitude L = ln(|F| + 1e-8) and phase
//   3. residual R = L - 3x3 mean filter of L (edges average the in-bounds
//      neighbors only)
//   4. s = |IDFT(exp(R + i*phase))|^2
//   5. Gaussian blur (sigma, radius above; border taps renormalized)
//   6. min-max normalize to [0,1], resize back to the input size
// A constant input short-circuits to the all-zero map.
SaliencyMap spectral_residual(const ImageF& image, const SpectralResidualOptions& opt = {});
SaliencyMap spectral_residual(const ImageU8& image, const SpectralResidualOptions& opt = {});

// Max-pool the map down to sal_h x sal_w. When the map dimensions are not
// divisible it is first bilinearly resized up to the smallest divisible size.
SaliencyGrid downsample_max(const SaliencyMap& map, int sal_h, int sal_w);

ImageU8 saliency_to_png_image(const SaliencyMap& map);

} // namespace samp

#endif
