#pragma once

#include "hidcode/bitstream.hpp"
#include "hidcode/channel.hpp"
#include "hidcode/codec.hpp"
#include "hidcode/localization.hpp"
#include "hidcode/recovery.hpp"

namespace hidcode {

struct PipelineConfig {
    int patch = 16;
    int pool = 4;
    CapacitySpec capacity{1024};
    ChannelConfig channel;
    double tau = 0.05;
    PredictorKind predictor = PredictorKind::neighbor;
    // When the fragile channel flags payload-carrying blocks as tampered, the
    // affected prefix tokens are replaced with the tampered image's own
    // re-encoded tokens instead of trusting known-corrupt bits.
    bool repair_prefix = true;
};

struct ProtectResult {
    RasterImage image;          // protected image
    WatermarkPayload sideband;  // sidecar channel only
    TokenPyramid pyramid;       // all K scales
    HiddenCode code;            // packed prefix
    int k = 0;
};

// Encode, pack the prefix that fits the capacity, embed. For the qim channel
// the payload goes in first, then the fragile localization overlay; the
// sidecar channel leaves pixels untouched and skips the overlay.
ProtectResult protect_image(const RasterImage& image, const Codebook& cb,
                            const PipelineConfig& cfg);

struct RecoverResult {
    RasterImage image;       // recovered image
    PixelMask localization;  // pixel-level fragile-channel mask (zeros for sidecar)
    PatchMask patch_mask;
    RecoveryReport report;
    std::size_t repaired_bits = 0;
};

RecoverResult recover_image(const RasterImage& tampered, const Codebook& cb,
                            const PipelineConfig& cfg,
                            const WatermarkPayload* sideband = nullptr);

}  // namespace hidcode
