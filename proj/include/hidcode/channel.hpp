#pragma once

#include <cstdint>
#include <string>

#include "hidcode/bitstream.hpp"
#include "hidcode/image.hpp"

namespace hidcode {

enum class ChannelKind { sidecar, qim };

ChannelKind channel_kind_from_string(const std::string& s);
std::string to_string(ChannelKind kind);

struct ChannelConfig {
    ChannelKind kind = ChannelKind::qim;
    float delta = 24.0f;      // QIM step
    int coeff_u = 2;          // horizontal frequency in the 8x8 block
    int coeff_v = 1;          // vertical frequency
    std::uint64_t key = 0;    // fragile-pattern seed
    std::size_t m_bits = 1024;

    void validate() const;
};

struct EmbedResult {
    RasterImage image;
    WatermarkPayload sideband;  // sidecar channel only; empty bits for qim
};

// Sidecar: pixels untouched, payload returned as sideband.
// QIM: one payload bit per 8x8 luma block in raster order, embedded by snapping
// the (coeff_u, coeff_v) DCT coefficient to even/odd multiples of delta. The luma
// delta is added to all three channels so chroma is preserved.
EmbedResult embed(const RasterImage& image, const WatermarkPayload& payload,
                  const ChannelConfig& cfg);

// Always returns cfg.m_bits bits; correctness is measured by bit accuracy.
// Sidecar requires the sideband recorded at embed time.
WatermarkPayload extract(const RasterImage& image, const ChannelConfig& cfg,
                         const WatermarkPayload* sideband = nullptr);

// Key-seeded bit in the blue-channel LSB of every pixel, constant per 2x2 block.
RasterImage embed_localization(const RasterImage& image, std::uint64_t key);

// A 2x2 block is flagged (1.0 over its pixels) when any blue LSB disagrees.
PixelMask extract_localization(const RasterImage& image, std::uint64_t key);

}  // namespace hidcode
