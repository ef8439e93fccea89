#pragma once

#include <string>
#include <vector>

#include "steg/rng.hpp"
#include "steg/tensor.hpp"

namespace steg {

// Distortion channel standing between encoder and decoder. Stages run in a
// fixed order (warp, blur, brightness, contrast, noise, compression, clamp)
// and each can be toggled independently. The whole pipeline is a pure
// function of (image, spec, seed).
struct CorruptionSpec {
    bool enable_warp = false;
    bool enable_blur = false;
    bool enable_brightness = false;
    bool enable_contrast = false;
    bool enable_noise = false;
    bool enable_jpeg = false;

    double perspective_jitter = 0.0;       // max corner displacement, fraction of the side
    std::vector<int> blur_kernel_sizes = {1};
    double brightness_lo = 0.0, brightness_hi = 0.0;  // additive
    double contrast_lo = 1.0, contrast_hi = 1.0;      // multiplicative
    double noise_sigma_lo = 0.0, noise_sigma_hi = 0.0;
    int jpeg_quality_lo = 90, jpeg_quality_hi = 90;

    void validate() const;  // InvalidConfig
    bool any_enabled() const;

    // built-in suites
    static CorruptionSpec none();
    static CorruptionSpec digital();
    static CorruptionSpec print_sim();
    static CorruptionSpec by_name(const std::string& name);  // InvalidConfig

    // plain key=value text, one field per line; parse accepts '#' comments
    std::string serialize() const;
    static CorruptionSpec parse(const std::string& text);  // InvalidConfig
};

// Homography taking the unit-square corners (0,0),(1,0),(1,1),(0,1) to the
// given corners, solved by the four-point direct linear transform and
// normalized so the bottom-right entry is 1. Throws DegenerateQuad when the
// corners admit no invertible solution.
Tensor homography_from_corners(const double corners[4][2]);

// Random homography whose corner displacements are uniform within
// perspective_jitter of the unit square. Zero jitter returns the exact
// identity. Resamples internally on degenerate draws, DegenerateQuad only
// after 100 failures.
Tensor sample_homography(const CorruptionSpec& spec, Rng& rng);

// Resample image {1,c,h,w} through the homography: output pixel centers are
// mapped through h into the input (unit-square coordinates on both sides,
// edges replicated).
Tensor warp_homography(Tape* t, const Tensor& image, const Tensor& h);

// Uniform k x k average with replicated edges; k odd, k = 1 is the identity.
Tensor box_blur(Tape* t, const Tensor& image, int k);

// Compression proxy: per 8x8 block and channel, the DCT coefficients are
// divided by the quality-scaled quantization table, pulled toward the nearest
// integer by the smooth rounding x - sin(2*pi*x)/(2*pi), and transformed
// back. The DC coefficient passes through so flat regions are preserved.
// Differentiable everywhere. Sides must be divisible by 8 (BadDimensions).
Tensor jpeg_approx(Tape* t, const Tensor& image, int quality);

// Full channel. Draws one base value from rng, then derives an independent
// substream per stage, so toggling one stage never changes what another
// draws. Gradients flow to image through every enabled stage when a tape is
// supplied. Returns the input tensor untouched when every stage is disabled.
Tensor apply_corruption(Tape* t, const Tensor& image, const CorruptionSpec& spec, Rng& rng);

}  // namespace steg
