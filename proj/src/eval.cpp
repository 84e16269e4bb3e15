#include "hidcode/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "hidcode/errors.hpp"

namespace hidcode {

Embedding color_layout_embedding(const RasterImage& image) {
    if (image.height <= 0 || image.width <= 0)
        throw ValidationError("embedding: empty image");
    Embedding e(kEmbeddingDim, 0.0f);
    // area-average pooling onto an 8x8 grid, channel-interleaved
    for (int cy = 0; cy < 8; ++cy) {
        const int y0 = cy * image.height / 8, y1 = (cy + 1) * image.height / 8;
        for (int cx = 0; cx < 8; ++cx) {
            const int x0 = cx * image.width / 8, x1 = (cx + 1) * image.width / 8;
            double sum[3] = {};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    for (int c = 0; c < 3; ++c) sum[c] += image.at(y, x, c);
            const double cells = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int c = 0; c < 3; ++c)
                e[(static_cast<std::size_t>(cy) * 8 + cx) * 3 + c] =
                    static_cast<float>(sum[c] / cells);
        }
    }
    double mean = 0.0;
    for (float v : e) mean += v;
    mean /= kEmbeddingDim;
    double norm2 = 0.0;
    for (float& v : e) {
        v = static_cast<float>(v - mean);
        norm2 += static_cast<double>(v) * v;
    }
    if (norm2 < 1e-24) {  // constant image: no layout signal
        std::fill(e.begin(), e.end(), 0.0f);
        e[0] = 1.0f;
        return e;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (float& v : e) v = static_cast<float>(v * inv);
    return e;
}

double similarity(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) throw ValidationError("similarity: dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
    return dot;
}

RetrievalMode retrieval_mode_from_string(const std::string& s) {
    if (s == "same") return RetrievalMode::same_samples;
    if (s == "different") return RetrievalMode::different_samples;
    throw ValidationError("unknown retrieval mode: " + s);
}

std::string to_string(RetrievalMode mode) {
    return mode == RetrievalMode::same_samples ? "same" : "different";
}

std::vector<std::string> topk(const RetrievalIndex& index, const Embedding& query, int k,
                              const std::string& gt_id) {
    if (k < 0) throw ValidationError("topk: negative k");
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(index.entries.size());
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        if (index.mode == RetrievalMode::different_samples && index.entries[i].id == gt_id)
            continue;
        scored.emplace_back(similarity(query, index.entries[i].embedding), i);
    }
    // ties keep entry order: stable sort on descending similarity only
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> ids;
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    ids.reserve(take);
    for (std::size_t i = 0; i < take; ++i) ids.push_back(index.entries[scored[i].second].id);
    return ids;
}

double acc_at_k(const RetrievalIndex& index, const std::vector<RetrievalQuery>& queries, int k) {
    if (queries.empty()) throw ValidationError("acc_at_k: no queries");
    std::size_t hit = 0;
    for (const RetrievalQuery& q : queries) {
        auto ids = topk(index, q.embedding, k, q.gt_id);
        if (std::find(ids.begin(), ids.end(), q.gt_id) != ids.end()) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(queries.size());
}

double label_acc_at_k(const RetrievalIndex& index, const std::vector<RetrievalQuery>& queries,
                      int k) {
    if (queries.empty()) throw ValidationError("label_acc_at_k: no queries");
    std::unordered_set<std::string> wanted;
    std::size_t hit = 0;
    for (const RetrievalQuery& q : queries) {
        auto ids = topk(index, q.embedding, k, q.gt_id);
        bool found = false;
        for (const std::string& id : ids) {
            for (const IndexEntry& e : index.entries)
                if (e.id == id && e.label == q.gt_label) {
                    found = true;
                    break;
                }
            if (found) break;
        }
        if (found) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(queries.size());
}

double bit_accuracy(const Bits& a, const Bits& b) {
    if (a.size() != b.size()) throw ValidationError("bit_accuracy: length mismatch");
    if (a.empty()) throw ValidationError("bit_accuracy: empty bit strings");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == b[i]) ++same;
    return static_cast<double>(same) / static_cast<double>(a.size());
}

AverageAttackResult average_attack(const std::vector<const RasterImage*>& watermarked,
                                   const std::vector<const RasterImage*>& clean,
                                   const RasterImage& clean_target, const Bits& reference,
                                   const ChannelConfig& cfg) {
    if (watermarked.empty()) throw ValidationError("average_attack: empty watermarked set");
    if (clean.empty()) throw ValidationError("average_attack: empty clean set");
    if (reference.empty() || reference.size() > cfg.m_bits)
        throw ValidationError("average_attack: reference length outside payload");
    const RasterImage& first = *watermarked.front();
    for (const RasterImage* img : watermarked)
        if (!img->same_shape(first)) throw ValidationError("average_attack: mixed dimensions");
    for (const RasterImage* img : clean)
        if (!img->same_shape(first)) throw ValidationError("average_attack: mixed dimensions");
    if (!clean_target.same_shape(first))
        throw ValidationError("average_attack: target dimensions differ");

    const std::size_t n = first.data.size();
    std::vector<double> acc(n, 0.0);
    for (const RasterImage* img : watermarked)
        for (std::size_t i = 0; i < n; ++i) acc[i] += img->data[i];
    for (double& v : acc) v /= static_cast<double>(watermarked.size());
    std::vector<double> accc(n, 0.0);
    for (const RasterImage* img : clean)
        for (std::size_t i = 0; i < n; ++i) accc[i] += img->data[i];
    for (double& v : accc) v /= static_cast<double>(clean.size());

    // Difference image re-centered at mid-gray isolates the embedded signal.
    RasterImage estimate(first.height, first.width);
    for (std::size_t i = 0; i < n; ++i) {
        double v = acc[i] - accc[i] + 128.0;
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        estimate.data[i] = static_cast<std::uint8_t>(std::lround(v));
    }

    const WatermarkPayload guessed = extract(estimate, cfg);
    AverageAttackResult result;
    result.forged = embed(clean_target, guessed, cfg).image;
    const WatermarkPayload carried = extract(result.forged, cfg);
    Bits head(carried.bits.begin(),
              carried.bits.begin() + static_cast<std::ptrdiff_t>(reference.size()));
    result.ba = bit_accuracy(head, reference);
    return result;
}

std::vector<SimilarityCell> similarity_forgery_eval(const RasterImage& decoded_from_code,
                                                    const RasterImage& original,
                                                    const std::vector<NamedDegradation>& degradations,
                                                    const RasterImage& different,
                                                    const EmbedderFn& embedder) {
    const Embedding base = embedder(decoded_from_code);
    std::vector<SimilarityCell> rows;
    rows.push_back({"original", similarity(base, embedder(original))});
    for (const auto& [name, fn] : degradations)
        rows.push_back({name, similarity(base, embedder(fn(original)))});
    rows.push_back({"different", similarity(base, embedder(different))});
    return rows;
}

void save_embeddings(const std::vector<Embedding>& embeddings, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    const std::uint32_t dim = embeddings.empty() ? 0 : static_cast<std::uint32_t>(embeddings[0].size());
    const std::uint32_t count = static_cast<std::uint32_t>(embeddings.size());
    std::uint8_t head[8];
    for (int i = 0; i < 4; ++i) head[i] = static_cast<std::uint8_t>((dim >> (8 * i)) & 0xff);
    for (int i = 0; i < 4; ++i) head[4 + i] = static_cast<std::uint8_t>((count >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(head), 8);
    for (const Embedding& e : embeddings) {
        if (e.size() != dim) throw ValidationError("save_embeddings: mixed dimensions");
        out.write(reinterpret_cast<const char*>(e.data()),
                  static_cast<std::streamsize>(e.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed to write " + path);
}

std::vector<Embedding> load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::uint8_t head[8];
    in.read(reinterpret_cast<char*>(head), 8);
    if (!in) throw IoError(path + ": truncated embedding file");
    std::uint32_t dim = 0, count = 0;
    for (int i = 0; i < 4; ++i) dim |= static_cast<std::uint32_t>(head[i]) << (8 * i);
    for (int i = 0; i < 4; ++i) count |= static_cast<std::uint32_t>(head[4 + i]) << (8 * i);
    std::vector<Embedding> out(count, Embedding(dim));
    for (Embedding& e : out) {
        in.read(reinterpret_cast<char*>(e.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
        if (!in) throw IoError(path + ": truncated embedding file");
    }
    return out;
}

}  // namespace hidcode
