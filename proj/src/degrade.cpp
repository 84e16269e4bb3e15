#include "hidcode/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hidcode/dct.hpp"
#include "hidcode/errors.hpp"
#include "hidcode/rng.hpp"

namespace hidcode {

namespace {

std::uint8_t clamp_round(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    return static_cast<std::uint8_t>(std::lround(v));
}

const int kLumaQ[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

const int kChromaQ[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                          24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                          99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                          99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

void scale_table(const int* base, int quality, int* out) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    for (int i = 0; i < 64; ++i) {
        int q = (base[i] * scale + 50) / 100;
        out[i] = std::clamp(q, 1, 255);
    }
}

// One padded plane, blockwise transform/quantize/dequantize/inverse, in place.
void jpeg_plane(std::vector<float>& plane, int h, int w, const int* qtable) {
    float block[64], coefs[64];
    for (int by = 0; by < h; by += 8)
        for (int bx = 0; bx < w; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    block[y * 8 + x] = plane[static_cast<std::size_t>(by + y) * w + bx + x] - 128.0f;
            dct8x8_forward(block, coefs);
            for (int i = 0; i < 64; ++i) {
                const long q = std::lround(coefs[i] / static_cast<float>(qtable[i]));
                coefs[i] = static_cast<float>(q) * static_cast<float>(qtable[i]);
            }
            dct8x8_inverse(coefs, block);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    plane[static_cast<std::size_t>(by + y) * w + bx + x] = block[y * 8 + x] + 128.0f;
        }
}

int pad_to(int v, int m) { return (v + m - 1) / m * m; }

}  // namespace

TamperMode tamper_mode_from_string(const std::string& s) {
    if (s == "noise") return TamperMode::noise;
    if (s == "constant") return TamperMode::constant;
    if (s == "donor") return TamperMode::donor;
    if (s == "shuffle") return TamperMode::shuffle;
    throw ValidationError("unknown tamper mode: " + s);
}

std::string to_string(TamperMode mode) {
    switch (mode) {
        case TamperMode::noise: return "noise";
        case TamperMode::constant: return "constant";
        case TamperMode::donor: return "donor";
        case TamperMode::shuffle: return "shuffle";
    }
    throw InternalError("unreachable tamper mode");
}

RasterImage tamper(const RasterImage& image, const PixelMask& mask, TamperMode mode,
                   std::uint64_t seed, const RasterImage* donor) {
    if (mask.height != image.height || mask.width != image.width)
        throw ValidationError("tamper: mask dimensions do not match image");
    if (!mask.is_binary()) throw ValidationError("tamper: mask must be binary");
    if (mode == TamperMode::donor) {
        if (!donor) throw ValidationError("tamper: donor mode requires a donor image");
        if (!donor->same_shape(image))
            throw ValidationError("tamper: donor dimensions do not match image");
    }

    RasterImage out = image;
    Rng rng(seed);
    if (mode == TamperMode::shuffle) {
        std::vector<std::pair<int, int>> pos;
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                if (mask.at(y, x) == 1.0f) pos.emplace_back(y, x);
        std::vector<std::size_t> perm(pos.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[next_below(rng, i)]);
        for (std::size_t i = 0; i < pos.size(); ++i)
            for (int c = 0; c < 3; ++c)
                out.at(pos[i].first, pos[i].second, c) =
                    image.at(pos[perm[i]].first, pos[perm[i]].second, c);
        return out;
    }

    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            if (mask.at(y, x) != 1.0f) continue;
            for (int c = 0; c < 3; ++c) {
                switch (mode) {
                    case TamperMode::noise:
                        out.at(y, x, c) = static_cast<std::uint8_t>(next_below(rng, 256));
                        break;
                    case TamperMode::constant: out.at(y, x, c) = 128; break;
                    case TamperMode::donor: out.at(y, x, c) = donor->at(y, x, c); break;
                    case TamperMode::shuffle: break;
                }
            }
        }
    return out;
}

RasterImage jpeg(const RasterImage& image, int quality) {
    if (quality < 1 || quality > 100) throw ValidationError("jpeg: quality outside [1,100]");
    int lq[64], cq[64];
    scale_table(kLumaQ, quality, lq);
    scale_table(kChromaQ, quality, cq);

    const int H = image.height, W = image.width;
    const int ph = pad_to(H, 16), pw = pad_to(W, 16);
    std::vector<float> Y(static_cast<std::size_t>(ph) * pw);
    std::vector<float> Cb(Y.size()), Cr(Y.size());
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) {
            const int sy = std::min(y, H - 1), sx = std::min(x, W - 1);
            const double r = image.at(sy, sx, 0), g = image.at(sy, sx, 1), b = image.at(sy, sx, 2);
            const std::size_t i = static_cast<std::size_t>(y) * pw + x;
            Y[i] = static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
            Cb[i] = static_cast<float>(-0.168736 * r - 0.331264 * g + 0.5 * b + 128.0);
            Cr[i] = static_cast<float>(0.5 * r - 0.418688 * g - 0.081312 * b + 128.0);
        }

    // 4:2:0 chroma: 2x2 average down, blockwise round trip, replicate back up.
    const int ch = ph / 2, cw = pw / 2;
    std::vector<float> sCb(static_cast<std::size_t>(ch) * cw), sCr(sCb.size());
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            const std::size_t a = static_cast<std::size_t>(2 * y) * pw + 2 * x;
            const std::size_t b = a + pw;
            sCb[static_cast<std::size_t>(y) * cw + x] = (Cb[a] + Cb[a + 1] + Cb[b] + Cb[b + 1]) / 4.0f;
            sCr[static_cast<std::size_t>(y) * cw + x] = (Cr[a] + Cr[a + 1] + Cr[b] + Cr[b + 1]) / 4.0f;
        }

    jpeg_plane(Y, ph, pw, lq);
    jpeg_plane(sCb, ch, cw, cq);
    jpeg_plane(sCr, ch, cw, cq);

    RasterImage out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * pw + x;
            const std::size_t c = static_cast<std::size_t>(y / 2) * cw + x / 2;
            const double yy = Y[i], cb = sCb[c] - 128.0, cr = sCr[c] - 128.0;
            out.at(y, x, 0) = clamp_round(yy + 1.402 * cr);
            out.at(y, x, 1) = clamp_round(yy - 0.344136 * cb - 0.714136 * cr);
            out.at(y, x, 2) = clamp_round(yy + 1.772 * cb);
        }
    return out;
}

RasterImage gaussian_blur(const RasterImage& image, double sigma) {
    if (sigma <= 0.0) throw ValidationError("blur: sigma must be positive");
    double k[5], sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        k[i] = std::exp(-(i - 2.0) * (i - 2.0) / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;

    const int H = image.height, W = image.width;
    std::vector<double> tmp(static_cast<std::size_t>(H) * W * 3);
    // horizontal pass, edge replication
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = -2; t <= 2; ++t)
                    acc += k[t + 2] * image.at(y, std::clamp(x + t, 0, W - 1), c);
                tmp[(static_cast<std::size_t>(y) * W + x) * 3 + c] = acc;
            }
    RasterImage out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int t = -2; t <= 2; ++t)
                    acc += k[t + 2] *
                           tmp[(static_cast<std::size_t>(std::clamp(y + t, 0, H - 1)) * W + x) * 3 + c];
                out.at(y, x, c) = clamp_round(acc);
            }
    return out;
}

RasterImage gaussian_noise(const RasterImage& image, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ValidationError("noise: sigma must be nonnegative");
    if (sigma == 0.0) return image;
    RasterImage out(image.height, image.width);
    Rng rng(seed);
    for (std::size_t i = 0; i < image.data.size(); ++i)
        out.data[i] = clamp_round(image.data[i] + sigma * next_gaussian(rng));
    return out;
}

RasterImage center_crop(const RasterImage& image, double fraction) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw ValidationError("center_crop: fraction outside (0,1]");
    const int H = image.height, W = image.width;
    const int ch = std::max(1, static_cast<int>(std::lround(H * fraction)));
    const int cw = std::max(1, static_cast<int>(std::lround(W * fraction)));
    if (ch == H && cw == W) return image;
    const int y0 = (H - ch) / 2, x0 = (W - cw) / 2;
    RasterImage out(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int sy = std::clamp(y, y0, y0 + ch - 1);
            const int sx = std::clamp(x, x0, x0 + cw - 1);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
        }
    return out;
}

RasterImage color_jitter(const RasterImage& image, double strength, std::uint64_t seed) {
    if (strength < 0.0 || strength > 1.0)
        throw ValidationError("color_jitter: strength outside [0,1]");
    if (strength == 0.0) return image;

    Rng rng(seed);
    auto factor = [&] { return 1.0 - strength + 2.0 * strength * next_unit(rng); };
    const double fb = factor();
    const double fc = factor();
    const double fs = factor();
    const double theta = (2.0 * next_unit(rng) - 1.0) * strength * 3.14159265358979323846;

    const std::size_t n = static_cast<std::size_t>(image.height) * image.width;
    std::vector<double> rgb(n * 3);
    for (std::size_t i = 0; i < n * 3; ++i) rgb[i] = image.data[i] * fb;

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mean += 0.299 * rgb[i * 3] + 0.587 * rgb[i * 3 + 1] + 0.114 * rgb[i * 3 + 2];
    mean /= static_cast<double>(n);

    const double ct = std::cos(theta), st = std::sin(theta);
    RasterImage out(image.height, image.width);
    for (std::size_t i = 0; i < n; ++i) {
        double r = mean + fc * (rgb[i * 3] - mean);
        double g = mean + fc * (rgb[i * 3 + 1] - mean);
        double b = mean + fc * (rgb[i * 3 + 2] - mean);
        const double l = 0.299 * r + 0.587 * g + 0.114 * b;
        r = l + fs * (r - l);
        g = l + fs * (g - l);
        b = l + fs * (b - l);
        // hue: rotate the chroma plane, luma fixed
        const double y = 0.299 * r + 0.587 * g + 0.114 * b;
        const double cb = -0.168736 * r - 0.331264 * g + 0.5 * b;
        const double cr = 0.5 * r - 0.418688 * g - 0.081312 * b;
        const double rcb = ct * cb - st * cr;
        const double rcr = st * cb + ct * cr;
        out.data[i * 3] = clamp_round(y + 1.402 * rcr);
        out.data[i * 3 + 1] = clamp_round(y - 0.344136 * rcb - 0.714136 * rcr);
        out.data[i * 3 + 2] = clamp_round(y + 1.772 * rcb);
    }
    return out;
}

MaskShape mask_shape_from_string(const std::string& s) {
    if (s == "rect") return MaskShape::rect;
    if (s == "blob") return MaskShape::blob;
    throw ValidationError("unknown mask shape: " + s);
}

std::string to_string(MaskShape shape) { return shape == MaskShape::rect ? "rect" : "blob"; }

PixelMask generate_mask(int height, int width, double coverage, MaskShape shape,
                        std::uint64_t seed) {
    if (height <= 0 || width <= 0) throw ValidationError("generate_mask: empty dimensions");
    if (coverage < 0.0 || coverage > 1.0)
        throw ValidationError("generate_mask: coverage outside [0,1]");
    PixelMask mask(height, width);
    if (coverage == 0.0) return mask;
    if (coverage == 1.0) {
        std::fill(mask.v.begin(), mask.v.end(), 1.0f);
        return mask;
    }

    Rng rng(seed);
    const double area = coverage * height * width;
    if (shape == MaskShape::rect) {
        const double aspect = 0.7 + 0.7 * next_unit(rng);
        int rh = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, height);
        int rw = std::clamp(static_cast<int>(std::lround(area / rh)), 1, width);
        if (static_cast<double>(rh) * rw > area * 1.02) rh = std::max(1, static_cast<int>(area / rw));
        const int y0 = static_cast<int>(next_below(rng, static_cast<std::uint64_t>(height - rh + 1)));
        const int x0 = static_cast<int>(next_below(rng, static_cast<std::uint64_t>(width - rw + 1)));
        for (int y = y0; y < y0 + rh; ++y)
            for (int x = x0; x < x0 + rw; ++x) mask.at(y, x) = 1.0f;
        return mask;
    }

    // blob: smooth value-noise field thresholded at the exact coverage quantile
    const int cell = 16;
    const int gh = height / cell + 2, gw = width / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
    for (double& v : lattice) v = next_unit(rng);
    std::vector<float> field(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const double ty = fy - y0, tx = fx - x0;
            const double a = lattice[static_cast<std::size_t>(y0) * gw + x0];
            const double b = lattice[static_cast<std::size_t>(y0) * gw + x0 + 1];
            const double c = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0];
            const double d = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
            field[static_cast<std::size_t>(y) * width + x] = static_cast<float>(
                a * (1 - ty) * (1 - tx) + b * (1 - ty) * tx + c * ty * (1 - tx) + d * ty * tx);
        }

    const std::size_t want = static_cast<std::size_t>(std::lround(area));
    std::vector<float> sorted = field;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(want - 1),
                     sorted.end(), std::greater<float>());
    const float thresh = sorted[want - 1];
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < field.size(); ++i)
        if (field[i] > thresh) {
            mask.v[i] = 1.0f;
            ++flagged;
        }
    for (std::size_t i = 0; i < field.size() && flagged < want; ++i)
        if (field[i] == thresh && mask.v[i] == 0.0f) {
            mask.v[i] = 1.0f;
            ++flagged;
        }
    return mask;
}

}  // namespace hidcode
