#include "hidcode/localization.hpp"

#include "hidcode/errors.hpp"

namespace hidcode {

double PatchMask::coverage() const {
    if (v.empty()) return 0.0;
    std::size_t ones = 0;
    for (std::uint8_t b : v) ones += b;
    return static_cast<double>(ones) / static_cast<double>(v.size());
}

PatchMask patchify_mask(const PixelMask& mask, int p, double tau) {
    if (p <= 0) throw ValidationError("patchify: patch size must be positive");
    if (mask.height % p != 0 || mask.width % p != 0)
        throw ValidationError("patchify: mask dimensions not divisible by patch size");
    if (tau < 0.0) throw ValidationError("patchify: negative threshold");

    PatchMask out(mask.height / p, mask.width / p);
    const double cells = static_cast<double>(p) * p;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            double sum = 0.0;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x) sum += mask.at(r * p + y, c * p + x);
            const double mean = sum / cells;
            out.at(r, c) = (mean > 0.0 && mean >= tau) ? 1 : 0;
        }
    return out;
}

PatchMask downscale_patch_mask(const PatchMask& mask, int target_rows, int target_cols) {
    if (target_rows <= 0 || target_cols <= 0)
        throw ValidationError("mask downscale: nonpositive target");
    if (target_rows > mask.rows || target_cols > mask.cols)
        throw ValidationError("mask downscale: target larger than source");
    if (target_rows == mask.rows && target_cols == mask.cols) return mask;

    PatchMask out(target_rows, target_cols);
    for (int fr = 0; fr < mask.rows; ++fr) {
        const int r0 = fr * target_rows / mask.rows;
        const int r1 = ((fr + 1) * target_rows - 1) / mask.rows;
        for (int fc = 0; fc < mask.cols; ++fc) {
            if (!mask.at(fr, fc)) continue;
            const int c0 = fc * target_cols / mask.cols;
            const int c1 = ((fc + 1) * target_cols - 1) / mask.cols;
            for (int r = r0; r <= r1; ++r)
                for (int c = c0; c <= c1; ++c) out.at(r, c) = 1;
        }
    }
    return out;
}

PixelMask patch_mask_to_pixels(const PatchMask& mask, int p) {
    if (p <= 0) throw ValidationError("patch mask upscale: patch size must be positive");
    PixelMask out(mask.rows * p, mask.cols * p);
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x) out.at(r * p + y, c * p + x) = 1.0f;
        }
    return out;
}

}  // namespace hidcode
