#include "hidcode/pipeline.hpp"

#include "hidcode/errors.hpp"

namespace hidcode {

namespace {

void check_config(const RasterImage& image, const Codebook& cb, const PipelineConfig& cfg) {
    if (cfg.patch <= 0 || cfg.pool <= 0 || cfg.patch % cfg.pool != 0)
        throw ValidationError("pipeline: patch size must be a positive multiple of pool");
    if (image.height % cfg.patch != 0 || image.width % cfg.patch != 0)
        throw ValidationError("pipeline: image dimensions not divisible by patch size");
    if (cb.C != static_cast<std::uint32_t>(3 * cfg.pool * cfg.pool))
        throw ValidationError("pipeline: codebook dim does not match pool size");
    if (cfg.channel.m_bits != cfg.capacity.m_bits)
        throw ValidationError("pipeline: channel capacity out of sync");
    auto [fh, fw] = cb.schedule.scales.back();
    if (fh != image.height / cfg.patch || fw != image.width / cfg.patch)
        throw ValidationError("pipeline: codebook schedule does not match image grid");
}

}  // namespace

ProtectResult protect_image(const RasterImage& image, const Codebook& cb,
                            const PipelineConfig& cfg) {
    check_config(image, cb, cfg);
    ProtectResult out;
    out.pyramid = encode(to_feature_grid(image, cfg.patch, cfg.pool), cb, cb.schedule);
    out.k = select_prefix_scales(cb.schedule, cb.V, cfg.capacity);
    out.code = pack(out.pyramid, cb.V, out.k);
    const WatermarkPayload payload = pad_to_capacity(out.code, cfg.capacity);

    EmbedResult embedded = embed(image, payload, cfg.channel);
    if (cfg.channel.kind == ChannelKind::qim)
        embedded.image = embed_localization(embedded.image, cfg.channel.key);
    out.image = std::move(embedded.image);
    out.sideband = std::move(embedded.sideband);
    return out;
}

RecoverResult recover_image(const RasterImage& tampered, const Codebook& cb,
                            const PipelineConfig& cfg, const WatermarkPayload* sideband) {
    check_config(tampered, cb, cfg);
    const int k = select_prefix_scales(cb.schedule, cb.V, cfg.capacity);

    WatermarkPayload payload = extract(tampered, cfg.channel, sideband);

    RecoverResult out;
    if (cfg.channel.kind == ChannelKind::qim) {
        out.localization = extract_localization(tampered, cfg.channel.key);
    } else {
        out.localization = PixelMask(tampered.height, tampered.width);  // nothing flagged
    }
    out.patch_mask = patchify_mask(out.localization, cfg.patch, cfg.tau);

    if (cfg.channel.kind == ChannelKind::qim && cfg.repair_prefix) {
        // Bit b travels in 8x8 block b; a flagged block means that bit is
        // untrustworthy. Replace whole tokens (never mix bit sources) with the
        // tampered image's own re-encoded tokens.
        const int bw = tampered.width / 8;
        const std::size_t n_bits = code_bits(cb.schedule, cb.V, k);
        std::vector<std::uint8_t> flagged(n_bits, 0);
        bool any = false;
        for (std::size_t b = 0; b < n_bits; ++b) {
            const int by = static_cast<int>(b) / bw * 8;
            const int bx = static_cast<int>(b) % bw * 8;
            for (int y = by; y < by + 8 && !flagged[b]; ++y)
                for (int x = bx; x < bx + 8; ++x)
                    if (out.localization.at(y, x) != 0.0f) {
                        flagged[b] = 1;
                        any = true;
                        break;
                    }
        }
        if (any) {
            const TokenPyramid h_d =
                encode(to_feature_grid(tampered, cfg.patch, cfg.pool), cb, cb.schedule);
            const HiddenCode code_d = pack(h_d, cb.V, k);
            const std::size_t per = static_cast<std::size_t>(bits_per_token(cb.V));
            for (std::size_t t = 0; t * per < n_bits; ++t) {
                bool hit = false;
                for (std::size_t b = t * per; b < (t + 1) * per; ++b)
                    if (flagged[b]) {
                        hit = true;
                        break;
                    }
                if (!hit) continue;
                for (std::size_t b = t * per; b < (t + 1) * per; ++b) {
                    if (payload.bits[b] != code_d.bits[b]) ++out.repaired_bits;
                    payload.bits[b] = code_d.bits[b];
                }
            }
        }
    }

    const HiddenCode code = strip_padding(payload, cb.schedule, cb.V, k);
    const TokenPyramid prefix = unpack(code, cb.schedule, cb.V, k);
    out.image = recover(tampered, prefix, out.patch_mask, cb, cb.schedule, cfg.predictor,
                        cfg.patch, cfg.pool, &out.report);
    return out;
}

}  // namespace hidcode
