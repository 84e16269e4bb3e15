#pragma once

#include <cstdint>
#include <vector>

namespace hidcode {

// 8-bit interleaved RGB raster, row-major.
struct RasterImage {
    int height = 0;
    int width = 0;
    static constexpr int channels = 3;
    std::vector<std::uint8_t> data;  // height * width * 3

    RasterImage() = default;
    RasterImage(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * channels, fill) {}

    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const RasterImage& o) const {
        return height == o.height && width == o.width;
    }
    bool operator==(const RasterImage& o) const = default;
};

// Dense float feature map, row-major, `dim` values per cell.
struct FeatureGrid {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<float> v;  // rows * cols * dim

    FeatureGrid() = default;
    FeatureGrid(int r, int c, int d, float fill = 0.0f)
        : rows(r), cols(c), dim(d), v(static_cast<std::size_t>(r) * c * d, fill) {}

    float* cell(int r, int c) { return &v[(static_cast<std::size_t>(r) * cols + c) * dim]; }
    const float* cell(int r, int c) const {
        return &v[(static_cast<std::size_t>(r) * cols + c) * dim];
    }

    bool operator==(const FeatureGrid& o) const = default;
};

// Per-pixel tampering map. Values in [0,1]; exactly {0,1} when binary.
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<float> v;

    PixelMask() = default;
    PixelMask(int h, int w, float fill = 0.0f)
        : height(h), width(w), v(static_cast<std::size_t>(h) * w, fill) {}

    float& at(int y, int x) { return v[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }

    bool is_binary() const;
    // Fraction of pixels with value 1.
    double coverage() const;
};

// Patch-wise average pooling of each p x p patch down to a q x q x 3 block,
// rescaled from [0,255] to [-1,1]. Output is (H/p) x (W/p) with dim 3*q*q,
// block values laid out cell-row-major with interleaved channels.
FeatureGrid to_feature_grid(const RasterImage& image, int patch, int pool);

// Inverse of to_feature_grid: nearest-neighbour upsampling of each q x q x 3
// block back to p x p pixels, rescaled to [0,255], clamped, rounded half-up.
RasterImage from_feature_grid(const FeatureGrid& grid, int patch, int pool);

// Area-average resampling to a smaller (or equal) grid.
FeatureGrid downsample(const FeatureGrid& grid, int target_rows, int target_cols);

// Bilinear resampling with corner alignment to a larger (or equal) grid.
FeatureGrid upsample(const FeatureGrid& grid, int target_rows, int target_cols);

}  // namespace hidcode
