#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "helpers.hpp"
#include "lsda/edge/sobel.hpp"

using namespace lsda;

TEST_CASE("constant images have no edges") {
    for (float level : {-1.0f, 0.0f, 0.37f, 1.0f}) {
        TensorF img = TensorF::full({9, 7, 3}, level);
        TensorF e = edge::sobel_edges(img);
        REQUIRE(e.shape() == std::vector<int>{9, 7, 6});
        for (size_t i = 0; i < e.size(); ++i) CHECK(e[i] == 0.0f);
    }
}

TEST_CASE("a unit column step saturates the horizontal response") {
    // Columns 0..3 at 0, columns 4.. at 1. At column 4 the kernel sees the
    // step across its full height: (1+2+1)/4 = 1.0.
    TensorF img({8, 8, 1});
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 8; ++x) img.at(y, x, 0) = 1.0f;

    TensorF e = edge::sobel_edges(img);
    for (int y = 0; y < 8; ++y) {
        CHECK(e.at(y, 4, 0) == doctest::Approx(1.0).epsilon(1e-12));   // horizontal
        CHECK(e.at(y, 3, 0) == doctest::Approx(1.0).epsilon(1e-12));   // mirrored side
        CHECK(e.at(y, 4, 1) == doctest::Approx(0.0).epsilon(1e-12));   // vertical
        CHECK(e.at(y, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));   // flat region
    }
    // Intensity increasing with x gives a positive horizontal response.
    CHECK(e.at(4, 4, 0) > 0.0f);
}

TEST_CASE("three-channel 128px input yields a six-channel map") {
    TensorF img({128, 128, 3});
    Rng rng(5);
    testutil::fill_random(img, rng, -1.0f, 1.0f);
    TensorF e = edge::sobel_edges(img);
    REQUIRE(e.shape() == std::vector<int>{128, 128, 6});
    for (size_t i = 0; i < e.size(); ++i) {
        CHECK(e[i] <= 1.0f);
        CHECK(e[i] >= -1.0f);
    }
}

TEST_CASE("edges ignore constant offsets") {
    TensorF img({16, 12, 3});
    Rng rng(6);
    testutil::fill_random(img, rng, -0.4f, 0.4f);
    TensorF shifted = img;
    for (size_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.35f;

    TensorF a = edge::sobel_edges(img);
    TensorF b = edge::sobel_edges(shifted);
    for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6f);
}

TEST_CASE("horizontal response of an image is the vertical response of its transpose") {
    const int n = 11;
    TensorF img({n, n, 2});
    Rng rng(7);
    testutil::fill_random(img, rng, -0.9f, 0.9f);

    TensorF t({n, n, 2});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 2; ++c) t.at(y, x, c) = img.at(x, y, c);

    TensorF ei = edge::sobel_edges(img);
    TensorF et = edge::sobel_edges(t);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 2; ++c)
                CHECK(std::abs(ei.at(y, x, 2 * c) - et.at(x, y, 2 * c + 1)) <= 1e-6f);
}

TEST_CASE("batched maps match per-image maps") {
    TensorF batch({3, 10, 14, 3});
    Rng rng(8);
    testutil::fill_random(batch, rng, -1.0f, 1.0f);

    TensorF all = edge::sobel_edges_batch(batch);
    REQUIRE(all.shape() == std::vector<int>{3, 10, 14, 6});

    for (int b = 0; b < 3; ++b) {
        TensorF img({10, 14, 3});
        std::memcpy(img.data(), batch.data() + static_cast<size_t>(b) * img.size(),
                    img.size() * sizeof(float));
        TensorF e = edge::sobel_edges(img);
        CHECK(std::memcmp(e.data(), all.data() + static_cast<size_t>(b) * e.size(),
                          e.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("steep ramps clip to the feature range") {
    // Alternating extreme columns push the raw response past +-4/4.
    TensorF img({8, 8, 1});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(y, x, 0) = (x % 2) ? 1.0f : -1.0f;
    TensorF e = edge::sobel_edges(img);
    float peak = 0.0f;
    for (size_t i = 0; i < e.size(); ++i) {
        CHECK(std::abs(e[i]) <= 1.0f);
        peak = std::max(peak, std::abs(e[i]));
    }
    CHECK(peak == 1.0f);  // the clip is active, not merely never reached
}
