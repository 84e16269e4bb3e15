#include "hidcode/image.hpp"

#include <cmath>
#include <string>

#include "hidcode/errors.hpp"

namespace hidcode {

bool PixelMask::is_binary() const {
    for (float x : v)
        if (x != 0.0f && x != 1.0f) return false;
    return true;
}

double PixelMask::coverage() const {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (float x : v) s += x;
    return s / static_cast<double>(v.size());
}

namespace {

std::uint8_t quantize_sample(float x) {
    float scaled = x * 127.5f + 127.5f;
    if (scaled < 0.0f) scaled = 0.0f;
    if (scaled > 255.0f) scaled = 255.0f;
    return static_cast<std::uint8_t>(std::floor(scaled + 0.5f));
}

}  // namespace

FeatureGrid to_feature_grid(const RasterImage& image, int patch, int pool) {
    if (patch <= 0 || pool <= 0 || patch % pool != 0)
        throw ValidationError("to_feature_grid: pool " + std::to_string(pool) +
                              " must divide patch " + std::to_string(patch));
    if (image.height <= 0 || image.width <= 0 || image.height % patch != 0 ||
        image.width % patch != 0)
        throw ValidationError("to_feature_grid: image " + std::to_string(image.height) + "x" +
                              std::to_string(image.width) + " not divisible by patch " +
                              std::to_string(patch));

    const int rows = image.height / patch;
    const int cols = image.width / patch;
    const int sub = patch / pool;  // pixels per pooled cell side
    FeatureGrid grid(rows, cols, 3 * pool * pool);

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            float* out = grid.cell(r, c);
            for (int cy = 0; cy < pool; ++cy) {
                for (int cx = 0; cx < pool; ++cx) {
                    float sum[3] = {0.0f, 0.0f, 0.0f};
                    for (int dy = 0; dy < sub; ++dy) {
                        const int y = r * patch + cy * sub + dy;
                        for (int dx = 0; dx < sub; ++dx) {
                            const int x = c * patch + cx * sub + dx;
                            for (int ch = 0; ch < 3; ++ch) sum[ch] += image.at(y, x, ch);
                        }
                    }
                    const float inv = 1.0f / static_cast<float>(sub * sub);
                    for (int ch = 0; ch < 3; ++ch)
                        out[(cy * pool + cx) * 3 + ch] = (sum[ch] * inv - 127.5f) / 127.5f;
                }
            }
        }
    }
    return grid;
}

RasterImage from_feature_grid(const FeatureGrid& grid, int patch, int pool) {
    if (patch <= 0 || pool <= 0 || patch % pool != 0)
        throw ValidationError("from_feature_grid: pool must divide patch");
    if (grid.dim != 3 * pool * pool)
        throw ValidationError("from_feature_grid: grid dim " + std::to_string(grid.dim) +
                              " != 3*pool^2 = " + std::to_string(3 * pool * pool));

    const int sub = patch / pool;
    RasterImage image(grid.rows * patch, grid.cols * patch);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const float* in = grid.cell(r, c);
            for (int cy = 0; cy < pool; ++cy) {
                for (int cx = 0; cx < pool; ++cx) {
                    std::uint8_t px[3];
                    for (int ch = 0; ch < 3; ++ch)
                        px[ch] = quantize_sample(in[(cy * pool + cx) * 3 + ch]);
                    for (int dy = 0; dy < sub; ++dy) {
                        const int y = r * patch + cy * sub + dy;
                        for (int dx = 0; dx < sub; ++dx) {
                            const int x = c * patch + cx * sub + dx;
                            for (int ch = 0; ch < 3; ++ch) image.at(y, x, ch) = px[ch];
                        }
                    }
                }
            }
        }
    }
    return image;
}

namespace {

// Overlap weights of target interval i (of `to` equal parts) against source
// cells (of `from` equal parts). Used by the separable area resampler.
struct Span {
    int first;
    std::vector<double> w;  // normalized weights starting at cell `first`
};

std::vector<Span> area_spans(int from, int to) {
    std::vector<Span> spans(to);
    const double scale = static_cast<double>(from) / to;
    for (int i = 0; i < to; ++i) {
        const double lo = i * scale;
        const double hi = (i + 1) * scale;
        int first = static_cast<int>(std::floor(lo));
        int last = static_cast<int>(std::ceil(hi)) - 1;
        if (last >= from) last = from - 1;
        Span s;
        s.first = first;
        double total = 0.0;
        for (int j = first; j <= last; ++j) {
            const double overlap = std::min(hi, static_cast<double>(j + 1)) -
                                   std::max(lo, static_cast<double>(j));
            s.w.push_back(overlap);
            total += overlap;
        }
        for (double& w : s.w) w /= total;
        spans[i] = std::move(s);
    }
    return spans;
}

}  // namespace

FeatureGrid downsample(const FeatureGrid& grid, int target_rows, int target_cols) {
    if (target_rows <= 0 || target_cols <= 0 || target_rows > grid.rows ||
        target_cols > grid.cols)
        throw ValidationError("downsample: target " + std::to_string(target_rows) + "x" +
                              std::to_string(target_cols) + " exceeds source " +
                              std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
    if (target_rows == grid.rows && target_cols == grid.cols) return grid;

    const auto row_spans = area_spans(grid.rows, target_rows);
    const auto col_spans = area_spans(grid.cols, target_cols);

    // Rows first, then columns.
    FeatureGrid mid(target_rows, grid.cols, grid.dim);
    for (int r = 0; r < target_rows; ++r) {
        const Span& rs = row_spans[r];
        for (int c = 0; c < grid.cols; ++c) {
            float* out = mid.cell(r, c);
            for (std::size_t j = 0; j < rs.w.size(); ++j) {
                const float* in = grid.cell(rs.first + static_cast<int>(j), c);
                const float w = static_cast<float>(rs.w[j]);
                for (int d = 0; d < grid.dim; ++d) out[d] += w * in[d];
            }
        }
    }
    FeatureGrid out(target_rows, target_cols, grid.dim);
    for (int r = 0; r < target_rows; ++r) {
        for (int c = 0; c < target_cols; ++c) {
            const Span& cs = col_spans[c];
            float* o = out.cell(r, c);
            for (std::size_t j = 0; j < cs.w.size(); ++j) {
                const float* in = mid.cell(r, cs.first + static_cast<int>(j));
                const float w = static_cast<float>(cs.w[j]);
                for (int d = 0; d < grid.dim; ++d) o[d] += w * in[d];
            }
        }
    }
    return out;
}

FeatureGrid upsample(const FeatureGrid& grid, int target_rows, int target_cols) {
    if (target_rows < grid.rows || target_cols < grid.cols)
        throw ValidationError("upsample: target " + std::to_string(target_rows) + "x" +
                              std::to_string(target_cols) + " smaller than source " +
                              std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
    if (target_rows == grid.rows && target_cols == grid.cols) return grid;

    FeatureGrid out(target_rows, target_cols, grid.dim);
    for (int r = 0; r < target_rows; ++r) {
        // Corner-aligned source coordinate.
        double sy = (target_rows == 1)
                        ? 0.0
                        : static_cast<double>(r) * (grid.rows - 1) / (target_rows - 1);
        int y0 = static_cast<int>(std::floor(sy));
        if (y0 > grid.rows - 2) y0 = grid.rows >= 2 ? grid.rows - 2 : 0;
        const double fy = grid.rows >= 2 ? sy - y0 : 0.0;
        const int y1 = grid.rows >= 2 ? y0 + 1 : y0;
        for (int c = 0; c < target_cols; ++c) {
            double sx = (target_cols == 1)
                            ? 0.0
                            : static_cast<double>(c) * (grid.cols - 1) / (target_cols - 1);
            int x0 = static_cast<int>(std::floor(sx));
            if (x0 > grid.cols - 2) x0 = grid.cols >= 2 ? grid.cols - 2 : 0;
            const double fx = grid.cols >= 2 ? sx - x0 : 0.0;
            const int x1 = grid.cols >= 2 ? x0 + 1 : x0;

            const float w00 = static_cast<float>((1.0 - fy) * (1.0 - fx));
            const float w01 = static_cast<float>((1.0 - fy) * fx);
            const float w10 = static_cast<float>(fy * (1.0 - fx));
            const float w11 = static_cast<float>(fy * fx);
            const float* a = grid.cell(y0, x0);
            const float* b = grid.cell(y0, x1);
            const float* d0 = grid.cell(y1, x0);
            const float* d1 = grid.cell(y1, x1);
            float* o = out.cell(r, c);
            for (int d = 0; d < grid.dim; ++d)
                o[d] = w00 * a[d] + w01 * b[d] + w10 * d0[d] + w11 * d1[d];
        }
    }
    return out;
}

}  // namespace hidcode
