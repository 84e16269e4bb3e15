#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "hidcode/degrade.hpp"
#include "hidcode/errors.hpp"
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

PixelMask rect_mask(int h, int w, int y0, int x0, int rh, int rw) {
    PixelMask m(h, w);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) m.at(y, x) = 1.0f;
    return m;
}

// Pixels as (r,g,b) triples for multiset comparisons.
std::vector<std::array<std::uint8_t, 3>> masked_pixels(const RasterImage& img,
                                                       const PixelMask& mask) {
    std::vector<std::array<std::uint8_t, 3>> out;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask.at(y, x) == 1.0f)
                out.push_back({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
    return out;
}

}  // namespace

TEST_CASE("tamper never touches pixels outside the mask") {
    RasterImage img = random_image(32, 32, 1);
    PixelMask mask = rect_mask(32, 32, 8, 8, 10, 12);
    RasterImage donor = random_image(32, 32, 2);
    for (TamperMode mode :
         {TamperMode::noise, TamperMode::constant, TamperMode::donor, TamperMode::shuffle}) {
        RasterImage out = tamper(img, mask, mode, 7, &donor);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (mask.at(y, x) == 0.0f)
                    for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == img.at(y, x, c));
    }
}

TEST_CASE("an empty mask makes tamper the identity") {
    RasterImage img = random_image(16, 16, 3);
    PixelMask empty(16, 16);
    CHECK(tamper(img, empty, TamperMode::noise, 1) == img);
}

TEST_CASE("constant mode writes mid-gray; donor mode copies the donor") {
    RasterImage img = random_image(16, 16, 4);
    RasterImage donor = random_image(16, 16, 5);
    PixelMask mask = rect_mask(16, 16, 2, 3, 5, 7);
    RasterImage flat = tamper(img, mask, TamperMode::constant, 1);
    RasterImage copied = tamper(img, mask, TamperMode::donor, 1, &donor);
    for (int y = 2; y < 7; ++y)
        for (int x = 3; x < 10; ++x)
            for (int c = 0; c < 3; ++c) {
                CHECK(flat.at(y, x, c) == 128);
                CHECK(copied.at(y, x, c) == donor.at(y, x, c));
            }
}

TEST_CASE("shuffle permutes the masked pixels without inventing values") {
    RasterImage img = random_image(24, 24, 6);
    PixelMask mask = rect_mask(24, 24, 4, 4, 12, 12);
    RasterImage out = tamper(img, mask, TamperMode::shuffle, 99);
    auto before = masked_pixels(img, mask);
    auto after = masked_pixels(out, mask);
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    CHECK(before == after);
    CHECK_FALSE(out == img);  // 144 random pixels almost surely move
}

TEST_CASE("noise tamper is seed-deterministic and seed-sensitive") {
    RasterImage img = random_image(16, 16, 7);
    PixelMask mask = rect_mask(16, 16, 0, 0, 8, 8);
    RasterImage a = tamper(img, mask, TamperMode::noise, 42);
    RasterImage b = tamper(img, mask, TamperMode::noise, 42);
    RasterImage c = tamper(img, mask, TamperMode::noise, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("tamper validates mask shape, binarity and donor presence") {
    RasterImage img = random_image(16, 16, 8);
    PixelMask wrong(8, 8);
    CHECK_THROWS_AS(tamper(img, wrong, TamperMode::noise, 1), ValidationError);
    PixelMask soft(16, 16, 0.5f);
    CHECK_THROWS_AS(tamper(img, soft, TamperMode::noise, 1), ValidationError);
    PixelMask mask = rect_mask(16, 16, 0, 0, 4, 4);
    CHECK_THROWS_AS(tamper(img, mask, TamperMode::donor, 1), ValidationError);
    RasterImage small_donor = random_image(8, 8, 9);
    CHECK_THROWS_AS(tamper(img, mask, TamperMode::donor, 1, &small_donor), ValidationError);
    CHECK_THROWS_AS(tamper_mode_from_string("paste"), ValidationError);
}

TEST_CASE("jpeg of a flat image returns the same flat image") {
    for (int quality : {10, 50, 70, 100}) {
        RasterImage img(32, 32, 77);
        RasterImage out = jpeg(img, quality);
        // DC-only blocks survive quantization unchanged up to rounding.
        for (auto v : out.data) CHECK(std::abs(int(v) - 77) <= 1);
    }
}

TEST_CASE("jpeg quality orders reconstruction error") {
    RasterImage img = testsupport::synth_image({}, 0);
    double bad = psnr(img, jpeg(img, 10));
    double mid = psnr(img, jpeg(img, 70));
    double good = psnr(img, jpeg(img, 100));
    CHECK(bad < mid);
    CHECK(mid < good);
    CHECK(good >= 40.0);
}

TEST_CASE("jpeg round trips are deterministic and validate quality") {
    RasterImage img = testsupport::synth_image({}, 1);
    CHECK(jpeg(img, 70) == jpeg(img, 70));
    CHECK_THROWS_AS(jpeg(img, 0), ValidationError);
    CHECK_THROWS_AS(jpeg(img, 101), ValidationError);
}

TEST_CASE("blurring an impulse reads out the normalized kernel") {
    RasterImage img(16, 16, 0);
    for (int c = 0; c < 3; ++c) img.at(8, 8, c) = 255;
    const double sigma = 1.1;
    RasterImage out = gaussian_blur(img, sigma);

    // Build the separable 5x5 kernel directly from the gaussian density.
    double w[5], sum = 0.0;
    for (int i = -2; i <= 2; ++i) {
        w[i + 2] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += w[i + 2];
    }
    for (double& v : w) v /= sum;
    for (int dy = -4; dy <= 4; ++dy)
        for (int dx = -4; dx <= 4; ++dx) {
            double expect = (std::abs(dy) <= 2 && std::abs(dx) <= 2)
                                ? 255.0 * w[dy + 2] * w[dx + 2]
                                : 0.0;
            CHECK(std::abs(out.at(8 + dy, 8 + dx, 0) - expect) <= 0.5 + 1e-9);
        }
}

TEST_CASE("blur preserves flat images and validates sigma") {
    RasterImage img(16, 16, 91);
    CHECK(gaussian_blur(img, 0.9) == img);
    CHECK_THROWS_AS(gaussian_blur(img, 0.0), ValidationError);
    CHECK_THROWS_AS(gaussian_blur(img, -1.0), ValidationError);
}

TEST_CASE("gaussian noise has the requested spread and a zero-sigma identity") {
    RasterImage img(64, 64, 128);
    CHECK(gaussian_noise(img, 0.0, 5) == img);
    RasterImage out = gaussian_noise(img, 6.0, 5);
    CHECK(gaussian_noise(img, 6.0, 5) == out);
    CHECK_FALSE(gaussian_noise(img, 6.0, 6) == out);
    double mean = 0.0, var = 0.0;
    for (auto v : out.data) mean += v;
    mean /= double(out.data.size());
    for (auto v : out.data) var += (v - mean) * (v - mean);
    var /= double(out.data.size());
    CHECK(mean == doctest::Approx(128.0).epsilon(0.01));
    CHECK(std::sqrt(var) == doctest::Approx(6.0).epsilon(0.05));
    CHECK_THROWS_AS(gaussian_noise(img, -1.0, 1), ValidationError);
}

TEST_CASE("center crop keeps the middle and replicates edges outward") {
    RasterImage img = random_image(32, 32, 10);
    CHECK(center_crop(img, 1.0) == img);
    RasterImage out = center_crop(img, 0.5);
    // The central 16x16 window survives in place.
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x)
            for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == img.at(y, x, c));
    // Padding replicates the nearest kept pixel.
    for (int c = 0; c < 3; ++c) {
        CHECK(out.at(0, 0, c) == img.at(8, 8, c));
        CHECK(out.at(31, 31, c) == img.at(23, 23, c));
        CHECK(out.at(0, 15, c) == img.at(8, 15, c));
    }
    CHECK_THROWS_AS(center_crop(img, 0.0), ValidationError);
    CHECK_THROWS_AS(center_crop(img, 1.5), ValidationError);
}

TEST_CASE("color jitter at zero strength is the identity and preserves rough luma") {
    RasterImage img = testsupport::synth_image({}, 2);
    CHECK(color_jitter(img, 0.0, 3) == img);
    RasterImage out = color_jitter(img, 0.2, 3);
    CHECK(color_jitter(img, 0.2, 3) == out);
    CHECK_FALSE(out == img);
    CHECK_THROWS_AS(color_jitter(img, -0.1, 1), ValidationError);
    CHECK_THROWS_AS(color_jitter(img, 1.1, 1), ValidationError);
}

TEST_CASE("rect masks are binary rectangles within 2% of the target coverage") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PixelMask m = generate_mask(256, 256, 0.25, MaskShape::rect, seed);
        CHECK(m.is_binary());
        CHECK(m.coverage() >= 0.23);
        CHECK(m.coverage() <= 0.27);
        // A rectangle's bounding box is exactly its support.
        int y0 = 256, y1 = -1, x0 = 256, x1 = -1, count = 0;
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x)
                if (m.at(y, x) == 1.0f) {
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y);
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x);
                    ++count;
                }
        CHECK(count == (y1 - y0 + 1) * (x1 - x0 + 1));
    }
}

TEST_CASE("blob masks hit the requested coverage exactly and stay connectedish") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        PixelMask m = generate_mask(128, 128, 0.25, MaskShape::blob, seed);
        CHECK(m.is_binary());
        CHECK(m.coverage() == doctest::Approx(0.25).epsilon(0.001));
    }
}

TEST_CASE("mask generation honors edge coverages and is deterministic") {
    CHECK(generate_mask(64, 64, 0.0, MaskShape::rect, 1).coverage() == 0.0);
    CHECK(generate_mask(64, 64, 1.0, MaskShape::rect, 1).coverage() == 1.0);
    CHECK(generate_mask(64, 64, 1.0, MaskShape::blob, 1).coverage() == 1.0);
    PixelMask a = generate_mask(64, 64, 0.3, MaskShape::rect, 9);
    PixelMask b = generate_mask(64, 64, 0.3, MaskShape::rect, 9);
    CHECK(a.v == b.v);
    PixelMask c = generate_mask(64, 64, 0.3, MaskShape::rect, 10);
    CHECK_FALSE(a.v == c.v);
    CHECK_THROWS_AS(generate_mask(0, 64, 0.3, MaskShape::rect, 1), ValidationError);
    CHECK_THROWS_AS(generate_mask(64, 64, 1.2, MaskShape::rect, 1), ValidationError);
    CHECK_THROWS_AS(mask_shape_from_string("oval"), ValidationError);
}
