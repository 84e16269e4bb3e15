#include "hidcode/codec.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hidcode/errors.hpp"
#include "hidcode/rng.hpp"

namespace hidcode {

namespace {

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& b, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(b, u);
}

struct Reader {
    const std::uint8_t* p;
    const std::uint8_t* end;
    const std::string& path;

    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end - p) < n) throw IoError(path + ": truncated codebook");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    float f32() {
        std::uint32_t u = u32();
        float v;
        std::memcpy(&v, &u, 4);
        return v;
    }
};

std::vector<std::uint8_t> serialize_codebook(const Codebook& cb) {
    std::vector<std::uint8_t> b;
    b.reserve(16 + cb.schedule.scales.size() * 4 + cb.entries.size() * 4);
    for (char c : {'M', 'S', 'Q', 'C'}) b.push_back(static_cast<std::uint8_t>(c));
    put_u16(b, 1);  // version
    put_u32(b, cb.V);
    put_u32(b, cb.C);
    put_u16(b, static_cast<std::uint16_t>(cb.schedule.scales.size()));
    for (auto [h, w] : cb.schedule.scales) {
        put_u16(b, static_cast<std::uint16_t>(h));
        put_u16(b, static_cast<std::uint16_t>(w));
    }
    for (float v : cb.entries) put_f32(b, v);
    return b;
}

std::array<std::uint8_t, 32> sha256(const std::uint8_t* data, std::size_t len) {
    std::array<std::uint8_t, 32> out{};
    unsigned int n = 0;
    if (EVP_Digest(data, len, out.data(), &n, EVP_sha256(), nullptr) != 1 || n != 32)
        throw InternalError("sha256 failed");
    return out;
}

// Nearest-neighbor search with precomputed entry norms.
// score = |c|^2 - 2 v.c (shifted squared distance); strict < keeps the lowest index on ties.
struct NnIndex {
    const float* entries = nullptr;
    std::uint32_t n = 0;
    std::uint32_t dim = 0;
    std::vector<float> norms;

    NnIndex(const float* e, std::uint32_t count, std::uint32_t d) : entries(e), n(count), dim(d) {
        norms.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const float* c = entries + static_cast<std::size_t>(i) * dim;
            float acc = 0.0f;
            for (std::uint32_t j = 0; j < dim; ++j) acc += c[j] * c[j];
            norms[i] = acc;
        }
    }

    std::uint32_t nearest(const float* v) const {
        std::uint32_t best = 0;
        float best_score = std::numeric_limits<float>::infinity();
        for (std::uint32_t i = 0; i < n; ++i) {
            const float* c = entries + static_cast<std::size_t>(i) * dim;
            float dot = 0.0f;
            for (std::uint32_t j = 0; j < dim; ++j) dot += v[j] * c[j];
            float score = norms[i] - 2.0f * dot;
            if (score < best_score) {
                best_score = score;
                best = i;
            }
        }
        return best;
    }
};

float dist2(const float* a, const float* b, std::uint32_t dim) {
    float acc = 0.0f;
    for (std::uint32_t j = 0; j < dim; ++j) {
        float d = a[j] - b[j];
        acc += d * d;
    }
    return acc;
}

}  // namespace

void ScaleSchedule::validate(int full_rows, int full_cols) const {
    if (scales.empty()) throw ValidationError("schedule: no scales");
    int ph = 0, pw = 0;
    for (auto [h, w] : scales) {
        if (h <= 0 || w <= 0) throw ValidationError("schedule: nonpositive scale");
        if (h < ph || w < pw) throw ValidationError("schedule: scales must be nondecreasing");
        ph = h;
        pw = w;
    }
    if (full_rows >= 0 && (ph != full_rows || pw != full_cols))
        throw ValidationError("schedule: last scale must equal the full grid");
}

ScaleSchedule default_schedule() {
    ScaleSchedule s;
    for (int side : {1, 2, 3, 4, 5, 6, 8, 10, 13, 16}) s.scales.emplace_back(side, side);
    return s;
}

std::string Codebook::id_hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint8_t b : id) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

void Codebook::recompute_id() {
    auto bytes = serialize_codebook(*this);
    id = sha256(bytes.data(), bytes.size());
}

std::uint32_t nearest_entry(const Codebook& cb, const float* vec) {
    if (cb.V == 0 || cb.entries.empty()) throw ValidationError("empty codebook");
    NnIndex index(cb.entries.data(), cb.V, cb.C);
    return index.nearest(vec);
}

FeatureGrid embed_tokens(const TokenGrid& tokens, const Codebook& cb) {
    FeatureGrid out(tokens.rows, tokens.cols, static_cast<int>(cb.C));
    for (int r = 0; r < tokens.rows; ++r)
        for (int c = 0; c < tokens.cols; ++c) {
            std::uint32_t i = tokens.at(r, c);
            if (i >= cb.V) throw ValidationError("token index out of codebook range");
            std::memcpy(out.cell(r, c), cb.entry(i), sizeof(float) * cb.C);
        }
    return out;
}

TokenPyramid encode(const FeatureGrid& grid, const Codebook& cb, const ScaleSchedule& sched) {
    if (cb.V == 0 || cb.entries.empty()) throw ValidationError("empty codebook");
    if (grid.dim != static_cast<int>(cb.C))
        throw ValidationError("feature dim does not match codebook");
    sched.validate(grid.rows, grid.cols);

    NnIndex index(cb.entries.data(), cb.V, cb.C);
    FeatureGrid accum(grid.rows, grid.cols, grid.dim);  // sum of upsampled quantized scales
    FeatureGrid resid(grid.rows, grid.cols, grid.dim);

    TokenPyramid pyr;
    pyr.codebook_id = cb.id_hex();
    for (auto [hi, wi] : sched.scales) {
        for (std::size_t j = 0; j < resid.v.size(); ++j) resid.v[j] = grid.v[j] - accum.v[j];
        FeatureGrid r = downsample(resid, hi, wi);
        TokenGrid tokens(hi, wi);
        for (int rr = 0; rr < hi; ++rr)
            for (int cc = 0; cc < wi; ++cc) tokens.at(rr, cc) = index.nearest(r.cell(rr, cc));
        FeatureGrid up = upsample(embed_tokens(tokens, cb), grid.rows, grid.cols);
        for (std::size_t j = 0; j < accum.v.size(); ++j) accum.v[j] += up.v[j];
        pyr.grids.push_back(std::move(tokens));
    }
    return pyr;
}

FeatureGrid decode(const TokenPyramid& pyr, const Codebook& cb, const ScaleSchedule& sched,
                   int upto_k) {
    sched.validate();
    if (upto_k < 0 || upto_k > pyr.count())
        throw ValidationError("decode: prefix length exceeds pyramid");
    if (pyr.count() > sched.count()) throw ValidationError("decode: pyramid longer than schedule");
    auto [rows, cols] = sched.scales.back();
    FeatureGrid out(rows, cols, static_cast<int>(cb.C));
    for (int i = 0; i < upto_k; ++i) {
        const TokenGrid& tg = pyr.grids[i];
        if (tg.rows != sched.scales[i].first || tg.cols != sched.scales[i].second)
            throw ValidationError("decode: pyramid shape does not match schedule");
        FeatureGrid up = upsample(embed_tokens(tg, cb), rows, cols);
        for (std::size_t j = 0; j < out.v.size(); ++j) out.v[j] += up.v[j];
    }
    return out;
}

TokenGrid quantize_single_scale(const FeatureGrid& grid, const Codebook& cb) {
    if (cb.V == 0 || cb.entries.empty()) throw ValidationError("empty codebook");
    if (grid.dim != static_cast<int>(cb.C))
        throw ValidationError("feature dim does not match codebook");
    NnIndex index(cb.entries.data(), cb.V, cb.C);
    TokenGrid tokens(grid.rows, grid.cols);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) tokens.at(r, c) = index.nearest(grid.cell(r, c));
    return tokens;
}

FeatureGrid dequantize_single_scale(const TokenGrid& tokens, const Codebook& cb) {
    return embed_tokens(tokens, cb);
}

namespace {

struct Collected {
    std::vector<float> vecs;  // count x dim
    std::size_t count = 0;
    std::size_t dropped_images = 0;
};

// Kept prefix length for one image: K normally, uniform 1..K when dropout triggers.
int draw_prefix(Rng& rng, double rate, int K, bool& dropped) {
    dropped = rate > 0.0 && next_unit(rng) < rate;
    if (!dropped) return K;
    return 1 + static_cast<int>(next_below(rng, static_cast<std::uint64_t>(K)));
}

// Residual decomposition with identity quantization (no codebook yet).
void collect_bootstrap(const std::vector<FeatureGrid>& corpus, const ScaleSchedule& sched,
                       double rate, Rng& rng, Collected& out) {
    const int K = sched.count();
    const int dim = corpus.front().dim;
    for (const FeatureGrid& grid : corpus) {
        bool dropped = false;
        int keep = draw_prefix(rng, rate, K, dropped);
        if (dropped) ++out.dropped_images;
        FeatureGrid accum(grid.rows, grid.cols, dim);
        FeatureGrid resid(grid.rows, grid.cols, dim);
        for (int i = 0; i < keep; ++i) {
            auto [hi, wi] = sched.scales[i];
            for (std::size_t j = 0; j < resid.v.size(); ++j) resid.v[j] = grid.v[j] - accum.v[j];
            FeatureGrid r = downsample(resid, hi, wi);
            out.vecs.insert(out.vecs.end(), r.v.begin(), r.v.end());
            out.count += static_cast<std::size_t>(hi) * wi;
            FeatureGrid up = upsample(r, grid.rows, grid.cols);
            for (std::size_t j = 0; j < accum.v.size(); ++j) accum.v[j] += up.v[j];
        }
    }
}

// Residuals as encode would see them under the current centroids.
void collect_under(const std::vector<FeatureGrid>& corpus, const ScaleSchedule& sched,
                   const std::vector<float>& centroids, std::uint32_t V, double rate, Rng& rng,
                   Collected& out) {
    const int K = sched.count();
    const int dim = corpus.front().dim;
    NnIndex index(centroids.data(), V, static_cast<std::uint32_t>(dim));
    for (const FeatureGrid& grid : corpus) {
        bool dropped = false;
        int keep = draw_prefix(rng, rate, K, dropped);
        if (dropped) ++out.dropped_images;
        FeatureGrid accum(grid.rows, grid.cols, dim);
        FeatureGrid resid(grid.rows, grid.cols, dim);
        for (int i = 0; i < keep; ++i) {
            auto [hi, wi] = sched.scales[i];
            for (std::size_t j = 0; j < resid.v.size(); ++j) resid.v[j] = grid.v[j] - accum.v[j];
            FeatureGrid r = downsample(resid, hi, wi);
            out.vecs.insert(out.vecs.end(), r.v.begin(), r.v.end());
            out.count += static_cast<std::size_t>(hi) * wi;
            FeatureGrid q(hi, wi, dim);
            for (int rr = 0; rr < hi; ++rr)
                for (int cc = 0; cc < wi; ++cc) {
                    std::uint32_t idx = index.nearest(r.cell(rr, cc));
                    std::memcpy(q.cell(rr, cc),
                                centroids.data() + static_cast<std::size_t>(idx) * dim,
                                sizeof(float) * dim);
                }
            FeatureGrid up = upsample(q, grid.rows, grid.cols);
            for (std::size_t j = 0; j < accum.v.size(); ++j) accum.v[j] += up.v[j];
        }
    }
}

std::size_t count_distinct(const std::vector<float>& vecs, std::size_t n, int dim) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto less = [&](std::size_t a, std::size_t b) {
        const float* pa = vecs.data() + a * dim;
        const float* pb = vecs.data() + b * dim;
        for (int j = 0; j < dim; ++j) {
            if (pa[j] < pb[j]) return true;
            if (pa[j] > pb[j]) return false;
        }
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    std::size_t distinct = n > 0 ? 1 : 0;
    for (std::size_t i = 1; i < n; ++i)
        if (less(order[i - 1], order[i])) ++distinct;
    return distinct;
}

void kmeanspp_seed(const std::vector<float>& vecs, std::size_t n, int dim, std::uint32_t V,
                   Rng& rng, std::vector<float>& centroids) {
    centroids.assign(static_cast<std::size_t>(V) * dim, 0.0f);
    std::size_t first = static_cast<std::size_t>(next_below(rng, n));
    std::memcpy(centroids.data(), vecs.data() + first * dim, sizeof(float) * dim);

    std::vector<float> best(n);  // squared distance to nearest chosen centroid
    for (std::size_t i = 0; i < n; ++i)
        best[i] = dist2(vecs.data() + i * dim, centroids.data(), dim);

    for (std::uint32_t v = 1; v < V; ++v) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += best[i];
        if (total <= 0.0)
            throw ValidationError("codebook size exceeds distinct training vectors");
        double target = next_unit(rng) * total;
        std::size_t pick = n - 1;
        double run = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            run += best[i];
            if (run >= target && best[i] > 0.0f) {
                pick = i;
                break;
            }
        }
        float* dst = centroids.data() + static_cast<std::size_t>(v) * dim;
        std::memcpy(dst, vecs.data() + pick * dim, sizeof(float) * dim);
        for (std::size_t i = 0; i < n; ++i) {
            float d = dist2(vecs.data() + i * dim, dst, dim);
            if (d < best[i]) best[i] = d;
        }
    }
}

void lloyd_step(const std::vector<float>& vecs, std::size_t n, int dim, std::uint32_t V,
                std::vector<float>& centroids) {
    NnIndex index(centroids.data(), V, static_cast<std::uint32_t>(dim));
    std::vector<std::uint32_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) assign[i] = index.nearest(vecs.data() + i * dim);

    std::vector<double> sums(static_cast<std::size_t>(V) * dim, 0.0);
    std::vector<std::size_t> counts(V, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double* s = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
        const float* p = vecs.data() + i * dim;
        for (int j = 0; j < dim; ++j) s[j] += p[j];
        ++counts[assign[i]];
    }
    for (std::uint32_t v = 0; v < V; ++v) {
        if (counts[v] == 0) continue;
        float* c = centroids.data() + static_cast<std::size_t>(v) * dim;
        const double* s = sums.data() + static_cast<std::size_t>(v) * dim;
        for (int j = 0; j < dim; ++j)
            c[j] = static_cast<float>(s[j] / static_cast<double>(counts[v]));
    }

    // Empty clusters take the globally worst-fit point.
    std::vector<bool> used(n, false);
    for (std::uint32_t v = 0; v < V; ++v) {
        if (counts[v] != 0) continue;
        std::size_t far = n;
        float far_d = -1.0f;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            float d = dist2(vecs.data() + i * dim,
                            centroids.data() + static_cast<std::size_t>(assign[i]) * dim, dim);
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == n) throw InternalError("no points left for empty-cluster reseed");
        used[far] = true;
        std::memcpy(centroids.data() + static_cast<std::size_t>(v) * dim,
                    vecs.data() + far * dim, sizeof(float) * dim);
    }
}

// Codebook invariant: no two entries within 1e-9. Duplicates are moved onto the
// training point farthest from every current centroid.
void separate_duplicates(const std::vector<float>& vecs, std::size_t n, int dim, std::uint32_t V,
                         std::vector<float>& centroids) {
    const float min_d2 = 1e-18f;  // (1e-9)^2
    for (std::uint32_t v2 = 1; v2 < V; ++v2) {
        bool dup = false;
        for (std::uint32_t v1 = 0; v1 < v2; ++v1)
            if (dist2(centroids.data() + static_cast<std::size_t>(v1) * dim,
                      centroids.data() + static_cast<std::size_t>(v2) * dim, dim) < min_d2) {
                dup = true;
                break;
            }
        if (!dup) continue;
        std::size_t far = n;
        float far_d = -1.0f;
        for (std::size_t i = 0; i < n; ++i) {
            float near = std::numeric_limits<float>::infinity();
            for (std::uint32_t v = 0; v < V; ++v) {
                if (v == v2) continue;
                float d = dist2(vecs.data() + i * dim,
                                centroids.data() + static_cast<std::size_t>(v) * dim, dim);
                if (d < near) near = d;
            }
            if (near > far_d) {
                far_d = near;
                far = i;
            }
        }
        if (far == n || far_d < min_d2)
            throw ValidationError("codebook size exceeds distinct training vectors");
        std::memcpy(centroids.data() + static_cast<std::size_t>(v2) * dim,
                    vecs.data() + far * dim, sizeof(float) * dim);
    }
}

}  // namespace

Codebook train_codebook(const std::vector<FeatureGrid>& corpus, std::uint32_t V,
                        const ScaleSchedule& sched, int iterations, double dropout_rate,
                        std::uint64_t seed, TrainStats* stats) {
    if (corpus.empty()) throw ValidationError("train_codebook: empty corpus");
    if (V < 2) throw ValidationError("train_codebook: V must be at least 2");
    if (!is_power_of_two(V)) throw ValidationError("train_codebook: V must be a power of two");
    if (iterations < 1) throw ValidationError("train_codebook: iterations must be at least 1");
    if (dropout_rate < 0.0 || dropout_rate > 1.0)
        throw ValidationError("train_codebook: dropout rate outside [0,1]");
    const int dim = corpus.front().dim;
    for (const FeatureGrid& g : corpus) {
        if (g.dim != dim) throw ValidationError("train_codebook: inconsistent feature dims");
        sched.validate(g.rows, g.cols);
    }

    Rng rng(seed);
    std::vector<float> centroids;
    Collected last;
    for (int round = 0; round < iterations; ++round) {
        Collected col;
        if (round == 0) {
            collect_bootstrap(corpus, sched, dropout_rate, rng, col);
            if (count_distinct(col.vecs, col.count, dim) < V)
                throw ValidationError("codebook size exceeds distinct training vectors");
            kmeanspp_seed(col.vecs, col.count, dim, V, rng, centroids);
        } else {
            collect_under(corpus, sched, centroids, V, dropout_rate, rng, col);
        }
        lloyd_step(col.vecs, col.count, dim, V, centroids);
        last = std::move(col);
    }
    separate_duplicates(last.vecs, last.count, dim, V, centroids);

    Codebook cb;
    cb.V = V;
    cb.C = static_cast<std::uint32_t>(dim);
    cb.entries = std::move(centroids);
    cb.schedule = sched;
    cb.recompute_id();
    if (stats) {
        stats->vectors_collected = last.count;
        stats->images_dropped = last.dropped_images;
    }
    return cb;
}

void save_codebook(const Codebook& cb, const std::string& path) {
    if (cb.V == 0 || cb.entries.size() != static_cast<std::size_t>(cb.V) * cb.C)
        throw ValidationError("save_codebook: malformed codebook");
    auto bytes = serialize_codebook(cb);
    auto hash = sha256(bytes.data(), bytes.size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.write(reinterpret_cast<const char*>(hash.data()), 32);
    if (!out) throw IoError("failed to write " + path);
}

Codebook load_codebook(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 48) throw IoError(path + ": truncated codebook");

    auto stored = sha256(bytes.data(), bytes.size() - 32);
    if (std::memcmp(stored.data(), bytes.data() + bytes.size() - 32, 32) != 0)
        throw IoError(path + ": codebook content hash mismatch");

    Reader r{bytes.data(), bytes.data() + bytes.size() - 32, path};
    r.need(4);
    if (std::memcmp(r.p, "MSQC", 4) != 0) throw IoError(path + ": not a codebook file");
    r.p += 4;
    if (r.u16() != 1) throw IoError(path + ": unsupported codebook version");

    Codebook cb;
    cb.V = r.u32();
    cb.C = r.u32();
    std::uint16_t K = r.u16();
    if (cb.V == 0 || cb.C == 0 || K == 0 || !is_power_of_two(cb.V))
        throw IoError(path + ": malformed codebook header");
    for (std::uint16_t i = 0; i < K; ++i) {
        int h = r.u16();
        int w = r.u16();
        cb.schedule.scales.emplace_back(h, w);
    }
    cb.entries.resize(static_cast<std::size_t>(cb.V) * cb.C);
    r.need(cb.entries.size() * 4);
    for (float& v : cb.entries) v = r.f32();
    if (r.p != r.end) throw IoError(path + ": trailing bytes in codebook");
    cb.schedule.validate();
    cb.id = stored;
    return cb;
}

}  // namespace hidcode
