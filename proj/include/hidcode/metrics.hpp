#pragma once

#include "hidcode/image.hpp"

namespace hidcode {

// Peak-signal-to-noise ratio in dB over all channels, peak 255.
// Identical images yield +infinity.
double psnr(const RasterImage& a, const RasterImage& b);

// Mean structural similarity over non-overlapping 8x8 windows, averaged over
// windows and channels. Standard stabilizing constants for 8-bit data.
double ssim(const RasterImage& a, const RasterImage& b);

double mse(const RasterImage& a, const RasterImage& b);

}  // namespace hidcode
