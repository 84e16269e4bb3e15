#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hidcode/image.hpp"

namespace hidcode {

// Coarse-to-fine ladder of (rows, cols) pairs; last pair is the full grid.
struct ScaleSchedule {
    std::vector<std::pair<int, int>> scales;

    int count() const { return static_cast<int>(scales.size()); }
    // Throws ValidationError unless nondecreasing in both axes, K >= 1,
    // and (when full_rows/full_cols >= 0) the last pair equals the full grid.
    void validate(int full_rows = -1, int full_cols = -1) const;
};

// Square sides 1..16 for a 16x16 final grid, ten scales.
ScaleSchedule default_schedule();

struct Codebook {
    std::uint32_t V = 0;
    std::uint32_t C = 0;
    std::vector<float> entries;  // V*C, row-major
    std::array<std::uint8_t, 32> id{};
    ScaleSchedule schedule;

    const float* entry(std::uint32_t i) const {
        return entries.data() + static_cast<std::size_t>(i) * C;
    }
    std::string id_hex() const;
    void recompute_id();  // SHA-256 over header fields + entries
};

struct TokenGrid {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint32_t> idx;

    TokenGrid() = default;
    TokenGrid(int r, int c) : rows(r), cols(c), idx(static_cast<std::size_t>(r) * c, 0) {}
    std::uint32_t& at(int r, int c) { return idx[static_cast<std::size_t>(r) * cols + c]; }
    std::uint32_t at(int r, int c) const { return idx[static_cast<std::size_t>(r) * cols + c]; }
    bool operator==(const TokenGrid&) const = default;
};

struct TokenPyramid {
    std::vector<TokenGrid> grids;  // prefix of the schedule
    std::string codebook_id;       // hex of Codebook::id

    int count() const { return static_cast<int>(grids.size()); }
    bool operator==(const TokenPyramid&) const = default;
};

// Nearest entry by L2, ties to the lowest index.
std::uint32_t nearest_entry(const Codebook& cb, const float* vec);

// Replace every index with its codeword.
FeatureGrid embed_tokens(const TokenGrid& tokens, const Codebook& cb);

TokenPyramid encode(const FeatureGrid& grid, const Codebook& cb, const ScaleSchedule& sched);

// Sum of upsampled codeword grids over scales 1..upto_k at the full grid size.
// upto_k = 0 gives the zero grid.
FeatureGrid decode(const TokenPyramid& pyr, const Codebook& cb, const ScaleSchedule& sched,
                   int upto_k);

TokenGrid quantize_single_scale(const FeatureGrid& grid, const Codebook& cb);
FeatureGrid dequantize_single_scale(const TokenGrid& tokens, const Codebook& cb);

struct TrainStats {
    std::size_t vectors_collected = 0;  // last collection pass
    std::size_t images_dropped = 0;     // images that kept only a prefix, last pass
};

Codebook train_codebook(const std::vector<FeatureGrid>& corpus, std::uint32_t V,
                        const ScaleSchedule& sched, int iterations, double dropout_rate,
                        std::uint64_t seed, TrainStats* stats = nullptr);

void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace hidcode
