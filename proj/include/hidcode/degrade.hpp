#pragma once

#include <cstdint>
#include <string>

#include "hidcode/image.hpp"

namespace hidcode {

enum class TamperMode { noise, constant, donor, shuffle };

TamperMode tamper_mode_from_string(const std::string& s);
std::string to_string(TamperMode mode);

// Replaces mask=1 pixels per mode; mask=0 pixels are untouched.
// donor mode copies from `donor` (same dimensions, required non-null).
RasterImage tamper(const RasterImage& image, const PixelMask& mask, TamperMode mode,
                   std::uint64_t seed, const RasterImage* donor = nullptr);

// Baseline JPEG round trip: BT.601 YCbCr, 4:2:0, standard tables scaled by the
// usual quality formula. Implemented internally so results are bit-reproducible.
RasterImage jpeg(const RasterImage& image, int quality);

// 5x5 kernel. The default sigma keeps a lone QIM-carrying block decodable
// after blurring: at sigma=1.1 an isolated block's embedded pattern retains
// only ~0.42 of its coefficient (below the lattice decision boundary), so
// payload bits neighboured by opposite bits are lost structurally.
RasterImage gaussian_blur(const RasterImage& image, double sigma = 0.9);
RasterImage gaussian_noise(const RasterImage& image, double sigma, std::uint64_t seed);

// Keeps the central fraction of each axis, padded back to the original size
// with edge replication.
RasterImage center_crop(const RasterImage& image, double fraction);

// Brightness, contrast, saturation factors uniform in [1-s, 1+s], hue rotation
// up to +/- s*180 degrees, applied in that order. strength 0 is the identity.
RasterImage color_jitter(const RasterImage& image, double strength, std::uint64_t seed);

enum class MaskShape { rect, blob };

MaskShape mask_shape_from_string(const std::string& s);
std::string to_string(MaskShape shape);

// Binary mask covering `coverage` of the pixels (rect within 2%, blob exact).
PixelMask generate_mask(int height, int width, double coverage, MaskShape shape,
                        std::uint64_t seed);

}  // namespace hidcode
