#pragma once

#include <utility>

#include "feddr/dataset.hpp"
#include "feddr/image_ops.hpp"

namespace feddr {

struct GaussianFilterSpec {
    bool enabled = false;
    double sigma = 1.0;
    int kernel_size = 5;
};

struct AugmentPolicy {
    double flip_prob = 0.5;
    double rotate_prob = 0.25;
    double rotate_max_degrees = 30.0;
    double brightness_contrast_prob = 0.25;
    GaussianFilterSpec gaussian;

    void validate() const {
        auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob_ok(flip_prob) || !prob_ok(rotate_prob) || !prob_ok(brightness_contrast_prob))
            throw ConfigError("augment policy probabilities must lie in [0,1]");
        if (gaussian.enabled) {
            if (gaussian.kernel_size % 2 == 0 || gaussian.kernel_size < 1)
                throw ConfigError("gaussian kernel size must be odd");
            if (gaussian.sigma <= 0) throw ConfigError("gaussian sigma must be positive");
        }
    }

    static AugmentPolicy disabled() {
        return AugmentPolicy{0.0, 0.0, 0.0, 0.0, {}};
    }
};

struct AugmentDecision {
    bool flip = false;
    bool rotate = false;
    bool brightness = false;
    double angle_degrees = 0.0;
    double alpha = 1.0;  // contrast
    double beta = 0.0;   // brightness shift
};

inline AugmentDecision draw_augment(const AugmentPolicy& policy, RngStream& rng) {
    AugmentDecision d;
    d.flip = rng.bernoulli(policy.flip_prob);
    d.rotate = rng.bernoulli(policy.rotate_prob);
    if (d.rotate)
        d.angle_degrees = rng.uniform(-policy.rotate_max_degrees, policy.rotate_max_degrees);
    d.brightness = rng.bernoulli(policy.brightness_contrast_prob);
    if (d.brightness) {
        d.alpha = rng.uniform(0.8, 1.2);
        d.beta = rng.uniform(-0.1, 0.1);
    }
    return d;
}

inline Tensor<float> horizontal_flip(const Tensor<float>& img) {
    const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    Tensor<float> out({h, w, c});
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j)
            for (std::int64_t ch = 0; ch < c; ++ch)
                out[(i * w + j) * c + ch] = img[(i * w + (w - 1 - j)) * c + ch];
    return out;
}

// rotate about the image centre; out-of-bounds source pixels read as 0
inline Tensor<float> rotate_bilinear(const Tensor<float>& img, double angle_degrees) {
    const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const double theta = angle_degrees * M_PI / 180.0;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    Tensor<float> out({h, w, c});
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) {
            // inverse rotation of the output coordinate
            const double sy = cs * (i - cy) + sn * (j - cx) + cy;
            const double sx = -sn * (i - cy) + cs * (j - cx) + cx;
            if (sy < 0 || sy > h - 1 || sx < 0 || sx > w - 1) continue;
            for (std::int64_t ch = 0; ch < c; ++ch)
                out[(i * w + j) * c + ch] = clamp01(bilinear_sample(img, sy, sx, ch));
        }
    return out;
}

inline Tensor<float> brightness_contrast(const Tensor<float>& img, double alpha, double beta) {
    Tensor<float> out(img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i)
        out[i] = clamp01(alpha * (static_cast<double>(img[i]) - 0.5) + 0.5 + beta);
    return out;
}

inline LabeledImage apply_augment(const LabeledImage& image, const AugmentDecision& decision,
                                  const AugmentPolicy& policy) {
    Tensor<float> px = image.pixels;
    if (decision.flip) px = horizontal_flip(px);
    if (decision.rotate) px = rotate_bilinear(px, decision.angle_degrees);
    if (decision.brightness) px = brightness_contrast(px, decision.alpha, decision.beta);
    if (policy.gaussian.enabled)
        px = gaussian_filter(px, policy.gaussian.sigma, policy.gaussian.kernel_size);
    return {std::move(px), image.label};
}

inline LabeledImage augment(const LabeledImage& image, const AugmentPolicy& policy,
                            RngStream& rng) {
    policy.validate();
    return apply_augment(image, draw_augment(policy, rng), policy);
}

// ---------------------------------------------------------------------------
// Oversampling by augmentation: every class is raised to the size of the
// largest class with augmented copies of uniformly drawn originals.
// ---------------------------------------------------------------------------

struct OversampleResult {
    Dataset dataset;
    // (index of added item, index of its augmentation source)
    std::vector<std::pair<int, int>> provenance;
};

inline OversampleResult oversample_balance_traced(const Dataset& dataset,
                                                  const AugmentPolicy& policy,
                                                  std::uint64_t seed) {
    policy.validate();
    const auto counts = dataset.per_class_counts();
    std::int64_t max_count = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw UsageError("oversample_balance: class " + std::to_string(c) +
                             " has no samples to oversample from");
        max_count = std::max(max_count, counts[static_cast<std::size_t>(c)]);
    }

    std::array<std::vector<int>, kNumClasses> by_class;
    for (std::size_t i = 0; i < dataset.items.size(); ++i)
        by_class[static_cast<std::size_t>(dataset.items[i].label)].push_back(
            static_cast<int>(i));

    OversampleResult out;
    out.dataset.items = dataset.items;
    out.dataset.name = dataset.name;
    out.dataset.provenance = Provenance::derived;
    RngStream root(seed);
    for (int c = 0; c < kNumClasses; ++c) {
        RngStream rng = root.fork("oversample", static_cast<std::uint64_t>(c));
        const auto& pool = by_class[static_cast<std::size_t>(c)];
        for (std::int64_t add = counts[static_cast<std::size_t>(c)]; add < max_count; ++add) {
            const int src = pool[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
            out.dataset.items.push_back(
                augment(dataset.items[static_cast<std::size_t>(src)], policy, rng));
            out.provenance.emplace_back(static_cast<int>(out.dataset.items.size()) - 1, src);
        }
    }
    return out;
}

inline Dataset oversample_balance(const Dataset& dataset, const AugmentPolicy& policy,
                                  std::uint64_t seed) {
    return oversample_balance_traced(dataset, policy, seed).dataset;
}

// preprocessing pass: Gaussian-filters every image of a dataset
inline Dataset apply_gaussian(const Dataset& dataset, const GaussianFilterSpec& spec) {
    if (!spec.enabled) return dataset;
    Dataset out;
    out.name = dataset.name;
    out.provenance = Provenance::derived;
    out.items.reserve(dataset.items.size());
    for (const auto& item : dataset.items)
        out.items.push_back(
            {gaussian_filter(item.pixels, spec.sigma, spec.kernel_size), item.label});
    return out;
}

}  // namespace feddr
