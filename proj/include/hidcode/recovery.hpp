#pragma once

#include <string>
#include <vector>

#include "hidcode/codec.hpp"
#include "hidcode/localization.hpp"

namespace hidcode {

enum class PredictorKind { zero, neighbor };

PredictorKind predictor_from_string(const std::string& s);
std::string to_string(PredictorKind kind);

// Everything a next-scale predictor may condition on. target_scale is 1-based;
// prefix holds scales 1..k, recovered holds the fused scales built so far.
struct PredictorContext {
    const TokenPyramid* prefix = nullptr;
    const TokenPyramid* recovered = nullptr;
    const TokenPyramid* tampered = nullptr;           // h_d, all K scales
    const std::vector<PatchMask>* scale_masks = nullptr;  // one per scale
    const Codebook* codebook = nullptr;
    const ScaleSchedule* schedule = nullptr;
    int target_scale = 0;
};

// Constant grid of the minimum-norm codeword (vanishing-residual guess).
TokenGrid predict_zero_residual(const PredictorContext& ctx);

// Unmasked positions copy the tampered token; masked positions copy the
// nearest unmasked one (L-inf distance, row-major tie order). Falls back to
// zero-residual when the whole scale is masked.
TokenGrid predict_neighbor_fill(const PredictorContext& ctx);

// Hard selection: tampered token where mask=0, prediction where mask=1.
TokenGrid fuse(const TokenGrid& z_star, const TokenGrid& z_d, const PatchMask& mask_i);

struct RecoveryReport {
    int k = 0;
    double mask_coverage = 0.0;            // finest-scale patch mask
    std::vector<int> predicted_per_scale;  // mask-1 positions for scales k+1..K
};

// Reassembles the full pyramid (prefix verbatim, then predict+fuse per scale)
// and decodes it back to pixels.
RasterImage recover(const RasterImage& tampered_image, const TokenPyramid& h_prefix,
                    const PatchMask& patch_mask, const Codebook& cb, const ScaleSchedule& sched,
                    PredictorKind predictor, int patch_size, int pool,
                    RecoveryReport* report = nullptr);

}  // namespace hidcode
