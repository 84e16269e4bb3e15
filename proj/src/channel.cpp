#include "hidcode/channel.hpp"

#include <cmath>

#include "hidcode/dct.hpp"
#include "hidcode/errors.hpp"
#include "hidcode/rng.hpp"

namespace hidcode {

namespace {

double round_half_up(double x) { return std::floor(x + 0.5); }

double luma(const RasterImage& img, int y, int x) {
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

void check_qim_dims(const RasterImage& image, const ChannelConfig& cfg) {
    if (image.height % 8 != 0 || image.width % 8 != 0)
        throw ValidationError("qim: image dimensions must be multiples of 8");
    const std::size_t blocks =
        static_cast<std::size_t>(image.height / 8) * static_cast<std::size_t>(image.width / 8);
    if (cfg.m_bits > blocks) throw ValidationError("qim: payload capacity exceeds block count");
}

std::uint8_t pattern_bit(std::uint64_t key, int by, int bx) {
    std::uint64_t h = mix64(key ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(by)) << 32 |
                                   static_cast<std::uint32_t>(bx)));
    return static_cast<std::uint8_t>(h & 1u);
}

}  // namespace

ChannelKind channel_kind_from_string(const std::string& s) {
    if (s == "sidecar") return ChannelKind::sidecar;
    if (s == "qim") return ChannelKind::qim;
    throw ValidationError("unknown channel kind: " + s);
}

std::string to_string(ChannelKind kind) {
    return kind == ChannelKind::sidecar ? "sidecar" : "qim";
}

void ChannelConfig::validate() const {
    if (delta <= 0.0f) throw ValidationError("channel: delta must be positive");
    if (coeff_u < 0 || coeff_u > 7 || coeff_v < 0 || coeff_v > 7)
        throw ValidationError("channel: coefficient position outside the 8x8 block");
    if (coeff_u == 0 && coeff_v == 0)
        throw ValidationError("channel: DC coefficient not allowed");
    if (m_bits == 0) throw ValidationError("channel: zero capacity");
}

EmbedResult embed(const RasterImage& image, const WatermarkPayload& payload,
                  const ChannelConfig& cfg) {
    cfg.validate();
    if (payload.bits.size() != cfg.m_bits)
        throw ValidationError("embed: payload length does not match capacity");

    if (cfg.kind == ChannelKind::sidecar) return {image, payload};

    check_qim_dims(image, cfg);
    RasterImage out = image;
    const int bw = image.width / 8;
    const double delta = cfg.delta;

    float block[64], coefs[64], pix[64];
    for (std::size_t b = 0; b < cfg.m_bits; ++b) {
        const int by = static_cast<int>(b) / bw * 8;
        const int bx = static_cast<int>(b) % bw * 8;
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                block[y * 8 + x] = static_cast<float>(luma(image, by + y, bx + x));
        dct8x8_forward(block, coefs);

        const double c = coefs[cfg.coeff_v * 8 + cfg.coeff_u];
        const double offset = payload.bits[b] ? delta : 0.0;
        const double snapped = 2.0 * delta * round_half_up((c - offset) / (2.0 * delta)) + offset;

        float change[64] = {};
        change[cfg.coeff_v * 8 + cfg.coeff_u] = static_cast<float>(snapped - c);
        dct8x8_inverse(change, pix);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                const double d = pix[y * 8 + x];
                for (int ch = 0; ch < 3; ++ch) {
                    double v = image.at(by + y, bx + x, ch) + d;
                    if (v < 0.0) v = 0.0;
                    if (v > 255.0) v = 255.0;
                    out.at(by + y, bx + x, ch) = static_cast<std::uint8_t>(round_half_up(v));
                }
            }
    }
    return {std::move(out), WatermarkPayload{}};
}

WatermarkPayload extract(const RasterImage& image, const ChannelConfig& cfg,
                         const WatermarkPayload* sideband) {
    cfg.validate();
    if (cfg.kind == ChannelKind::sidecar) {
        if (!sideband) throw ValidationError("extract: sidecar channel requires the sideband");
        if (sideband->bits.size() != cfg.m_bits)
            throw ValidationError("extract: sideband length does not match capacity");
        return *sideband;
    }

    check_qim_dims(image, cfg);
    WatermarkPayload payload;
    payload.bits.resize(cfg.m_bits);
    const int bw = image.width / 8;

    float block[64], coefs[64];
    for (std::size_t b = 0; b < cfg.m_bits; ++b) {
        const int by = static_cast<int>(b) / bw * 8;
        const int bx = static_cast<int>(b) % bw * 8;
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                block[y * 8 + x] = static_cast<float>(luma(image, by + y, bx + x));
        dct8x8_forward(block, coefs);
        const double c = coefs[cfg.coeff_v * 8 + cfg.coeff_u];
        const long long k = static_cast<long long>(round_half_up(c / cfg.delta));
        payload.bits[b] = static_cast<std::uint8_t>(((k % 2) + 2) % 2);
    }
    return payload;
}

RasterImage embed_localization(const RasterImage& image, std::uint64_t key) {
    if (image.height % 2 != 0 || image.width % 2 != 0)
        throw ValidationError("localization: image dimensions must be even");
    RasterImage out = image;
    for (int by = 0; by < image.height / 2; ++by)
        for (int bx = 0; bx < image.width / 2; ++bx) {
            const std::uint8_t bit = pattern_bit(key, by, bx);
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    std::uint8_t& blue = out.at(by * 2 + dy, bx * 2 + dx, 2);
                    blue = static_cast<std::uint8_t>((blue & 0xfe) | bit);
                }
        }
    return out;
}

PixelMask extract_localization(const RasterImage& image, std::uint64_t key) {
    if (image.height % 2 != 0 || image.width % 2 != 0)
        throw ValidationError("localization: image dimensions must be even");
    PixelMask mask(image.height, image.width);
    for (int by = 0; by < image.height / 2; ++by)
        for (int bx = 0; bx < image.width / 2; ++bx) {
            const std::uint8_t bit = pattern_bit(key, by, bx);
            bool mismatch = false;
            for (int dy = 0; dy < 2 && !mismatch; ++dy)
                for (int dx = 0; dx < 2 && !mismatch; ++dx)
                    if ((image.at(by * 2 + dy, bx * 2 + dx, 2) & 1u) != bit) mismatch = true;
            if (mismatch)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) mask.at(by * 2 + dy, bx * 2 + dx) = 1.0f;
        }
    return mask;
}

}  // namespace hidcode
