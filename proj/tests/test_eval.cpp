#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "hidcode/degrade.hpp"
#include "hidcode/errors.hpp"
#include "hidcode/eval.hpp"
#include "hidcode/metrics.hpp"
#include "hidcode/rng.hpp"
#include "support/synthetic.hpp"

using namespace hidcode;

namespace {

RasterImage random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    RasterImage img(h, w);
    for (auto& b : img.data) b = static_cast<std::uint8_t>(next_below(rng, 256));
    return img;
}

Bits random_bits(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Bits bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(next_below(rng, 2));
    return bits;
}

Embedding unit(std::initializer_list<float> vals) {
    Embedding e(vals);
    double n = 0.0;
    for (float v : e) n += double(v) * v;
    n = std::sqrt(n);
    for (float& v : e) v = static_cast<float>(v / n);
    return e;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("color layout embeddings are unit length and deterministic") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RasterImage img = random_image(37, 53, seed);  // non-divisible dims on purpose
        Embedding e = color_layout_embedding(img);
        REQUIRE(static_cast<int>(e.size()) == kEmbeddingDim);
        double norm = 0.0;
        for (float v : e) norm += double(v) * v;
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(color_layout_embedding(img) == e);
    }
}

TEST_CASE("a constant image maps to the fixed degenerate unit vector") {
    RasterImage flat(16, 16, 93);
    Embedding e = color_layout_embedding(flat);
    CHECK(e[0] == 1.0f);
    for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i] == 0.0f);
    // Any constant level lands on the same vector, so flats are mutually close.
    CHECK(similarity(e, color_layout_embedding(RasterImage(8, 8, 17))) == doctest::Approx(1.0));
}

TEST_CASE("the embedding is mean-free by construction") {
    RasterImage img = testsupport::synth_image({}, 0);
    Embedding e = color_layout_embedding(img);
    double sum = 0.0;
    for (float v : e) sum += v;
    CHECK(std::fabs(sum) < 1e-4);
}

TEST_CASE("similarity is the cosine with the expected extremes") {
    Embedding a = unit({1.0f, 2.0f, -1.0f});
    CHECK(similarity(a, a) == doctest::Approx(1.0));
    Embedding neg(a);
    for (float& v : neg) v = -v;
    CHECK(similarity(a, neg) == doctest::Approx(-1.0));
    Embedding ortho = unit({2.0f, -1.0f, 0.0f});  // dot with a: 2-2+0
    CHECK(similarity(a, ortho) == doctest::Approx(0.0).scale(1.0));
    Embedding wrong(4, 0.5f);
    CHECK_THROWS_AS(similarity(a, wrong), ValidationError);
}

TEST_CASE("topk ranks a hand-built index by dot product") {
    RetrievalIndex index;
    index.entries.push_back({"a", "x", unit({1.0f, 0.0f})});
    index.entries.push_back({"b", "x", unit({1.0f, 1.0f})});
    index.entries.push_back({"c", "y", unit({0.0f, 1.0f})});
    Embedding q = unit({2.0f, 1.0f});
    // dots: a=0.894, b=0.949, c=0.447
    CHECK(topk(index, q, 1, "") == std::vector<std::string>{"b"});
    CHECK(topk(index, q, 2, "") == std::vector<std::string>{"b", "a"});
    CHECK(topk(index, q, 3, "") == std::vector<std::string>{"b", "a", "c"});
    CHECK(topk(index, q, 10, "").size() == 3);  // k beyond the index is capped
    CHECK(topk(index, q, 0, "").empty());
    CHECK_THROWS_AS(topk(index, q, -1, ""), ValidationError);
}

TEST_CASE("exact duplicates tie and keep entry order") {
    RetrievalIndex index;
    index.entries.push_back({"first", "x", unit({1.0f, 0.0f})});
    index.entries.push_back({"second", "x", unit({1.0f, 0.0f})});
    Embedding q = unit({1.0f, 0.0f});
    CHECK(topk(index, q, 2, "") == std::vector<std::string>{"first", "second"});
}

TEST_CASE("different-samples mode excludes the query's own identity") {
    RetrievalIndex index;
    index.mode = RetrievalMode::different_samples;
    index.entries.push_back({"self", "x", unit({1.0f, 0.0f})});
    index.entries.push_back({"other", "x", unit({0.9f, 0.1f})});
    Embedding q = unit({1.0f, 0.0f});
    auto ids = topk(index, q, 2, "self");
    CHECK(ids == std::vector<std::string>{"other"});
    index.mode = RetrievalMode::same_samples;
    CHECK(topk(index, q, 1, "self") == std::vector<std::string>{"self"});
    CHECK(retrieval_mode_from_string("different") == RetrievalMode::different_samples);
    CHECK(to_string(RetrievalMode::same_samples) == "same");
    CHECK_THROWS_AS(retrieval_mode_from_string("mixed"), ValidationError);
}

TEST_CASE("retrieval accuracy is monotone in k and exact for identity queries") {
    testsupport::CorpusSpec spec;
    spec.images = 20;
    spec.families = 4;
    RetrievalIndex index;
    std::vector<RetrievalQuery> queries;
    for (int i = 0; i < 20; ++i) {
        Embedding e = color_layout_embedding(testsupport::synth_image(spec, i));
        index.entries.push_back({testsupport::synth_id(i), testsupport::synth_label(spec, i), e});
        queries.push_back({testsupport::synth_id(i), testsupport::synth_label(spec, i), e});
    }
    CHECK(acc_at_k(index, queries, 1) == 1.0);
    CHECK(label_acc_at_k(index, queries, 1) == 1.0);

    // Perturbed queries: accuracy may drop but can only grow with k.
    std::vector<RetrievalQuery> noisy = queries;
    Rng rng(5);
    for (auto& q : noisy) {
        Embedding e = q.embedding;
        for (float& v : e) v += static_cast<float>(next_gaussian(rng) * 0.05);
        q.embedding = e;
    }
    double prev = 0.0;
    for (int k = 1; k <= 20; ++k) {
        double acc = acc_at_k(index, noisy, k);
        double lacc = label_acc_at_k(index, noisy, k);
        CHECK(acc >= prev);
        CHECK(lacc >= acc);  // the label hit is implied by the image hit
        prev = acc;
    }
    CHECK(acc_at_k(index, noisy, 20) == 1.0);
    CHECK_THROWS_AS(acc_at_k(index, {}, 1), ValidationError);
}

TEST_CASE("bit accuracy counts agreements with hand-checked values") {
    CHECK(bit_accuracy({1, 0, 1}, {1, 0, 1}) == 1.0);
    CHECK(bit_accuracy({1, 0, 1}, {0, 1, 0}) == 0.0);
    CHECK(bit_accuracy({1, 0, 1}, {1, 0, 0}) == doctest::Approx(2.0 / 3.0));
    CHECK(bit_accuracy({1, 0, 1}, {1, 0, 0}) == bit_accuracy({1, 0, 0}, {1, 0, 1}));
    CHECK_THROWS_AS(bit_accuracy({1, 0}, {1}), ValidationError);
    CHECK_THROWS_AS(bit_accuracy({}, {}), ValidationError);
}

TEST_CASE("independent random bit strings agree on about half the positions") {
    double ba = bit_accuracy(random_bits(2000, 1), random_bits(2000, 2));
    CHECK(ba > 0.45);
    CHECK(ba < 0.55);
}

TEST_CASE("the single-image difference attack steals most of the payload") {
    // With n=1 the "average" minus the clean original is the exact embedding
    // delta. Its carrier coefficient is snapped-minus-original, so the parity
    // readout is right wherever the original coefficient sat inside half a
    // step of zero -- which is most blocks of a smooth image.
    RasterImage source = testsupport::synth_image({}, 4);
    RasterImage target = testsupport::synth_image({}, 5);
    ChannelConfig cfg;
    cfg.kind = ChannelKind::qim;
    cfg.m_bits = 1024;
    Bits payload = random_bits(1024, 9);
    EmbedResult wm = embed(source, WatermarkPayload{payload}, cfg);

    AverageAttackResult res =
        average_attack({&wm.image}, {&source}, target, payload, cfg);
    CHECK(res.ba > 0.9);
    CHECK(res.forged.same_shape(target));
    // The forged image is a lightly perturbed target, not a copy of the source.
    CHECK(psnr(target, res.forged) > 30.0);
}

TEST_CASE("average attack validates its inputs") {
    RasterImage a = random_image(64, 64, 20);
    RasterImage b = random_image(32, 32, 21);
    ChannelConfig cfg;
    cfg.kind = ChannelKind::qim;
    cfg.m_bits = 64;
    Bits ref = random_bits(64, 22);
    CHECK_THROWS_AS(average_attack({}, {&a}, a, ref, cfg), ValidationError);
    CHECK_THROWS_AS(average_attack({&a}, {}, a, ref, cfg), ValidationError);
    CHECK_THROWS_AS(average_attack({&a}, {&b}, a, ref, cfg), ValidationError);
    CHECK_THROWS_AS(average_attack({&a}, {&a}, b, ref, cfg), ValidationError);
    Bits empty;
    CHECK_THROWS_AS(average_attack({&a}, {&a}, a, empty, cfg), ValidationError);
    Bits oversized = random_bits(65, 23);
    CHECK_THROWS_AS(average_attack({&a}, {&a}, a, oversized, cfg), ValidationError);
}

TEST_CASE("similarity table lists original, degradations in order, then different") {
    RasterImage original = testsupport::synth_image({}, 6);
    RasterImage decoded = gaussian_blur(original, 2.0);  // stand-in reconstruction
    RasterImage different = testsupport::synth_image({}, 7);
    std::vector<NamedDegradation> degs;
    degs.emplace_back("jpeg70", [](const RasterImage& im) { return jpeg(im, 70); });
    degs.emplace_back("noise", [](const RasterImage& im) { return gaussian_noise(im, 8.0, 3); });

    auto rows = similarity_forgery_eval(decoded, original, degs, different,
                                        color_layout_embedding);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].column == "original");
    CHECK(rows[1].column == "jpeg70");
    CHECK(rows[2].column == "noise");
    CHECK(rows[3].column == "different");
    // Mild degradations barely move the color layout, so those cells hug the
    // original's score; the unrelated image scores clearly lower.
    CHECK(rows[0].value > 0.9);
    CHECK(rows[1].value > 0.9);
    CHECK(rows[2].value > 0.9);
    CHECK(rows[3].value < rows[0].value);
    CHECK(rows[3].value < rows[1].value);
    CHECK(rows[3].value < rows[2].value);
}

TEST_CASE("embedding cache files round trip exactly") {
    std::vector<Embedding> embs;
    for (std::uint64_t s = 0; s < 5; ++s)
        embs.push_back(color_layout_embedding(random_image(24, 24, 30 + s)));
    std::string path = temp_path("hidcode_embs.bin");
    save_embeddings(embs, path);
    std::vector<Embedding> back = load_embeddings(path);
    REQUIRE(back.size() == embs.size());
    for (std::size_t i = 0; i < embs.size(); ++i) CHECK(back[i] == embs[i]);

    std::filesystem::resize_file(path, 10);
    CHECK_THROWS_AS(load_embeddings(path), IoError);
    std::remove(path.c_str());

    std::vector<Embedding> mixed{Embedding(4, 0.0f), Embedding(5, 0.0f)};
    CHECK_THROWS_AS(save_embeddings(mixed, temp_path("hidcode_embs_bad.bin")), ValidationError);
}
