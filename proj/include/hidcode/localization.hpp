#pragma once

#include <cstdint>
#include <vector>

#include "hidcode/image.hpp"

namespace hidcode {

struct PatchMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> v;  // {0,1}

    PatchMask() = default;
    PatchMask(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0) {}
    std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double coverage() const;
    bool operator==(const PatchMask&) const = default;
};

// Per-patch mean of the pixel mask; a patch is flagged when the mean reaches tau.
// Untouched patches (mean 0) are never flagged, so tau=0 flags exactly the
// patches containing at least one tampered pixel. tau above 1 flags nothing.
PatchMask patchify_mask(const PixelMask& mask, int p, double tau);

// Conservative resize to a coarser grid: a coarse cell is 1 iff any covered
// fine cell is 1.
PatchMask downscale_patch_mask(const PatchMask& mask, int target_rows, int target_cols);

// Nearest-neighbor upscale to pixel resolution for inspection dumps.
PixelMask patch_mask_to_pixels(const PatchMask& mask, int p);

}  // namespace hidcode
