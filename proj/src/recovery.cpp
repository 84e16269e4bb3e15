#include "hidcode/recovery.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "hidcode/errors.hpp"

namespace hidcode {

PredictorKind predictor_from_string(const std::string& s) {
    if (s == "zero") return PredictorKind::zero;
    if (s == "neighbor") return PredictorKind::neighbor;
    throw ValidationError("unknown predictor: " + s);
}

std::string to_string(PredictorKind kind) {
    return kind == PredictorKind::zero ? "zero" : "neighbor";
}

TokenGrid predict_zero_residual(const PredictorContext& ctx) {
    const Codebook& cb = *ctx.codebook;
    if (cb.V == 0) throw ValidationError("predict: empty codebook");
    std::vector<float> zero(cb.C, 0.0f);
    const std::uint32_t best = nearest_entry(cb, zero.data());
    auto [h, w] = ctx.schedule->scales[ctx.target_scale - 1];
    TokenGrid out(h, w);
    for (std::uint32_t& idx : out.idx) idx = best;
    return out;
}

TokenGrid predict_neighbor_fill(const PredictorContext& ctx) {
    const int i = ctx.target_scale;
    const TokenGrid& zd = ctx.tampered->grids[i - 1];
    const PatchMask& mask = (*ctx.scale_masks)[i - 1];
    if (mask.rows != zd.rows || mask.cols != zd.cols)
        throw InternalError("predict: scale mask does not match token grid");

    bool any_unmasked = false;
    for (std::uint8_t b : mask.v)
        if (!b) {
            any_unmasked = true;
            break;
        }
    if (!any_unmasked) return predict_zero_residual(ctx);

    TokenGrid out(zd.rows, zd.cols);
    for (int r = 0; r < zd.rows; ++r)
        for (int c = 0; c < zd.cols; ++c) {
            if (!mask.at(r, c)) {
                out.at(r, c) = zd.at(r, c);
                continue;
            }
            int best_r = -1, best_c = -1;
            int best_d = std::numeric_limits<int>::max();
            for (int rr = 0; rr < zd.rows; ++rr)
                for (int cc = 0; cc < zd.cols; ++cc) {
                    if (mask.at(rr, cc)) continue;
                    const int d = std::max(std::abs(rr - r), std::abs(cc - c));
                    if (d < best_d) {
                        best_d = d;
                        best_r = rr;
                        best_c = cc;
                    }
                }
            out.at(r, c) = zd.at(best_r, best_c);
        }
    return out;
}

TokenGrid fuse(const TokenGrid& z_star, const TokenGrid& z_d, const PatchMask& mask_i) {
    if (z_star.rows != z_d.rows || z_star.cols != z_d.cols || mask_i.rows != z_d.rows ||
        mask_i.cols != z_d.cols)
        throw ValidationError("fuse: shape mismatch");
    TokenGrid out(z_d.rows, z_d.cols);
    for (std::size_t j = 0; j < out.idx.size(); ++j)
        out.idx[j] = mask_i.v[j] ? z_star.idx[j] : z_d.idx[j];
    return out;
}

RasterImage recover(const RasterImage& tampered_image, const TokenPyramid& h_prefix,
                    const PatchMask& patch_mask, const Codebook& cb, const ScaleSchedule& sched,
                    PredictorKind predictor, int patch_size, int pool, RecoveryReport* report) {
    const int K = sched.count();
    const int k = h_prefix.count();
    if (k > K) throw ValidationError("recover: prefix longer than schedule");
    auto [fh, fw] = sched.scales.back();
    if (patch_mask.rows != fh || patch_mask.cols != fw)
        throw ValidationError("recover: patch mask does not match the finest scale");

    const TokenPyramid h_d =
        encode(to_feature_grid(tampered_image, patch_size, pool), cb, sched);

    std::vector<PatchMask> scale_masks;
    scale_masks.reserve(K);
    for (auto [h, w] : sched.scales) scale_masks.push_back(downscale_patch_mask(patch_mask, h, w));

    TokenPyramid rec;
    rec.codebook_id = cb.id_hex();
    rec.grids = h_prefix.grids;  // prefix kept verbatim

    if (report) {
        report->k = k;
        report->mask_coverage = patch_mask.coverage();
        report->predicted_per_scale.clear();
    }

    PredictorContext ctx;
    ctx.prefix = &h_prefix;
    ctx.recovered = &rec;
    ctx.tampered = &h_d;
    ctx.scale_masks = &scale_masks;
    ctx.codebook = &cb;
    ctx.schedule = &sched;
    for (int i = k + 1; i <= K; ++i) {
        ctx.target_scale = i;
        TokenGrid z_star = predictor == PredictorKind::zero ? predict_zero_residual(ctx)
                                                            : predict_neighbor_fill(ctx);
        rec.grids.push_back(fuse(z_star, h_d.grids[i - 1], scale_masks[i - 1]));
        if (report) {
            int ones = 0;
            for (std::uint8_t b : scale_masks[i - 1].v) ones += b;
            report->predicted_per_scale.push_back(ones);
        }
    }

    return from_feature_grid(decode(rec, cb, sched, K), patch_size, pool);
}

}  // namespace hidcode
