#pragma once

#include <string>

#include "hidcode/image.hpp"

namespace hidcode {

// PNG (RGB8) and binary PPM (P6). Format selected by file extension;
// anything that is not .ppm is written as PNG.
RasterImage load_image(const std::string& path);
void save_image(const RasterImage& image, const std::string& path);

// Masks are single-channel PNG: 0 = untampered, 255 = tampered.
// Intermediate grey levels load as soft values in (0,1).
PixelMask load_mask(const std::string& path);
void save_mask(const PixelMask& mask, const std::string& path);

}  // namespace hidcode
