#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hidcode/bitstream.hpp"
#include "hidcode/channel.hpp"
#include "hidcode/image.hpp"

namespace hidcode {

using Embedding = std::vector<float>;
using EmbedderFn = std::function<Embedding(const RasterImage&)>;

inline constexpr int kEmbeddingDim = 192;

// 8x8x3 area-pooled color layout, centered on its global mean, L2-normalized.
// Degenerate (constant) images map to a fixed unit vector.
Embedding color_layout_embedding(const RasterImage& image);

double similarity(const Embedding& a, const Embedding& b);  // cosine of unit vectors

struct IndexEntry {
    std::string id;
    std::string label;
    Embedding embedding;
};

enum class RetrievalMode { same_samples, different_samples };

RetrievalMode retrieval_mode_from_string(const std::string& s);
std::string to_string(RetrievalMode mode);

struct RetrievalIndex {
    std::vector<IndexEntry> entries;
    RetrievalMode mode = RetrievalMode::same_samples;
};

// Ids of the k highest-similarity entries, ties broken by entry order.
// In different-samples mode the query's ground-truth id is excluded first.
std::vector<std::string> topk(const RetrievalIndex& index, const Embedding& query, int k,
                              const std::string& gt_id);

struct RetrievalQuery {
    std::string gt_id;
    std::string gt_label;
    Embedding embedding;
};

// Fraction of queries whose ground-truth image (resp. any same-label image)
// appears in the top k.
double acc_at_k(const RetrievalIndex& index, const std::vector<RetrievalQuery>& queries, int k);
double label_acc_at_k(const RetrievalIndex& index, const std::vector<RetrievalQuery>& queries,
                      int k);

double bit_accuracy(const Bits& a, const Bits& b);

struct AverageAttackResult {
    RasterImage forged;
    double ba = 0.0;
};

// Pixel-averages the watermarked set, subtracts the average of the clean set
// (same corpus for grey-box, disjoint for black-box), extracts the payload
// estimate, embeds it into the clean target, and scores the forged image's
// payload against `reference` (compared over the first reference.size() bits).
AverageAttackResult average_attack(const std::vector<const RasterImage*>& watermarked,
                                   const std::vector<const RasterImage*>& clean,
                                   const RasterImage& clean_target, const Bits& reference,
                                   const ChannelConfig& cfg);

using NamedDegradation = std::pair<std::string, std::function<RasterImage(const RasterImage&)>>;

struct SimilarityCell {
    std::string column;
    double value = 0.0;
};

// Similarity of the code-reconstructed image against the original, each
// degraded variant of the original, and a different image.
std::vector<SimilarityCell> similarity_forgery_eval(const RasterImage& decoded_from_code,
                                                    const RasterImage& original,
                                                    const std::vector<NamedDegradation>& degradations,
                                                    const RasterImage& different,
                                                    const EmbedderFn& embedder);

// Cache format: u32 dim, u32 count, then count*dim little-endian floats.
void save_embeddings(const std::vector<Embedding>& embeddings, const std::string& path);
std::vector<Embedding> load_embeddings(const std::string& path);

}  // namespace hidcode
