#include <doctest.h>

#include "feddr/augment.hpp"
#include "feddr/synthetic.hpp"

using namespace feddr;

namespace {

LabeledImage test_image(std::uint64_t seed, std::int64_t n = 16) {
    RngStream rng(seed);
    Tensor<float> px({n, n, 3});
    for (std::int64_t i = 0; i < px.size(); ++i)
        px[i] = static_cast<float>(rng.uniform(0, 1));
    return {std::move(px), 2};
}

}  // namespace

TEST_CASE("identity policy returns the input bit-identically") {
    LabeledImage img = test_image(1);
    RngStream rng(5);
    LabeledImage out = augment(img, AugmentPolicy::disabled(), rng);
    CHECK(bitwise_equal(out.pixels, img.pixels));
    CHECK(out.label == img.label);
}

TEST_CASE("flip applies at the configured 50% frequency") {
    AugmentPolicy policy;  // paper defaults: 0.5 / 0.25 / 0.25
    RngStream rng(2024);
    int flips = 0, rotations = 0, brightness = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        AugmentDecision d = draw_augment(policy, rng);
        flips += d.flip;
        rotations += d.rotate;
        brightness += d.brightness;
    }
    CHECK(std::fabs(flips / double(draws) - 0.50) < 0.03);
    CHECK(std::fabs(rotations / double(draws) - 0.25) < 0.03);
    CHECK(std::fabs(brightness / double(draws) - 0.25) < 0.03);
}

TEST_CASE("horizontal flip is an involution and actually flips") {
    LabeledImage img = test_image(3);
    Tensor<float> once = horizontal_flip(img.pixels);
    CHECK_FALSE(bitwise_equal(once, img.pixels));
    CHECK(bitwise_equal(horizontal_flip(once), img.pixels));
    // leftmost column moves to rightmost
    CHECK(once[(0 * 16 + 15) * 3 + 0] == img.pixels[(0 * 16 + 0) * 3 + 0]);
}

TEST_CASE("gaussian filter preserves constant images") {
    Tensor<float> flat = Tensor<float>::constant({9, 9, 3}, 0.37f);
    Tensor<float> out = gaussian_filter(flat, 1.0, 5);
    for (std::int64_t i = 0; i < out.size(); ++i)
        CHECK(std::fabs(out[i] - 0.37f) < 1e-6f);

    // degenerate 1x1 image passes through unchanged
    Tensor<float> tiny = Tensor<float>::constant({1, 1, 3}, 0.8f);
    Tensor<float> tiny_out = gaussian_filter(tiny, 1.0, 5);
    CHECK(bitwise_equal(tiny_out, tiny));
}

TEST_CASE("rotation keeps shape and label, zero-fills outside") {
    LabeledImage img = test_image(4, 24);
    img.pixels.array() += 0.5f;  // make corners clearly nonzero before clamping
    for (std::int64_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = clamp01(img.pixels[i]);
    Tensor<float> rot = rotate_bilinear(img.pixels, 30.0);
    CHECK(rot.shape() == img.pixels.shape());
    // a corner rotated out of bounds reads 0
    CHECK(rot[0] == 0.0f);
}

TEST_CASE("brightness/contrast jitter stays in range") {
    LabeledImage img = test_image(5);
    Tensor<float> out = brightness_contrast(img.pixels, 1.2, 0.1);
    for (std::int64_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] >= 0.0f);
        CHECK(out[i] <= 1.0f);
    }
}

TEST_CASE("augment preserves label and shape under any decision") {
    AugmentPolicy policy;
    policy.gaussian = {true, 1.0, 5};
    RngStream rng(77);
    for (int i = 0; i < 25; ++i) {
        LabeledImage img = test_image(100 + static_cast<std::uint64_t>(i));
        LabeledImage out = augment(img, policy, rng);
        CHECK(out.label == img.label);
        CHECK(out.pixels.shape() == img.pixels.shape());
    }
}

TEST_CASE("oversample_balance equalizes class counts") {
    RngStream img_rng(8);
    Dataset ds;
    const std::array<int, 5> counts{100, 10, 10, 10, 10};
    for (int c = 0; c < 5; ++c)
        for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
            LabeledImage img = test_image(static_cast<std::uint64_t>(c * 1000 + i));
            img.label = c;
            ds.items.push_back(std::move(img));
        }

    Dataset balanced = oversample_balance(ds, AugmentPolicy{}, 42);
    CHECK(balanced.size() == 500);
    CHECK(balanced.size() - ds.size() == 360);
    for (auto n : balanced.per_class_counts()) CHECK(n == 100);

    // the originals are a prefix of the output
    for (std::size_t i = 0; i < ds.size(); ++i)
        CHECK(bitwise_equal(balanced.items[i].pixels, ds.items[i].pixels));

    // already balanced -> unchanged
    Dataset again = oversample_balance(balanced, AugmentPolicy{}, 43);
    CHECK(again.size() == balanced.size());

    // determinism
    Dataset b2 = oversample_balance(ds, AugmentPolicy{}, 42);
    REQUIRE(b2.size() == balanced.size());
    for (std::size_t i = 0; i < balanced.size(); ++i)
        CHECK(bitwise_equal(b2.items[i].pixels, balanced.items[i].pixels));
}

TEST_CASE("oversample provenance: every copy keeps its source label") {
    Dataset ds;
    const std::array<int, 5> counts{12, 3, 7, 5, 2};
    for (int c = 0; c < 5; ++c)
        for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
            LabeledImage img = test_image(static_cast<std::uint64_t>(c * 100 + i));
            img.label = c;
            ds.items.push_back(std::move(img));
        }
    auto result = oversample_balance_traced(ds, AugmentPolicy{}, 7);
    CHECK(result.provenance.size() == result.dataset.size() - ds.size());
    for (auto [added, source] : result.provenance) {
        CHECK(result.dataset.items[static_cast<std::size_t>(added)].label ==
              ds.items[static_cast<std::size_t>(source)].label);
    }
}

TEST_CASE("oversample refuses a label space with an empty class") {
    Dataset ds;
    LabeledImage img = test_image(1);
    img.label = 0;
    ds.items.push_back(img);
    try {
        oversample_balance(ds, AugmentPolicy{}, 1);
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
}
