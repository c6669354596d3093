#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "feddr/layers.hpp"
#include "feddr/tensor.hpp"

namespace feddr {

// Severity grades 0..4: none, mild, moderate, severe, proliferative.

struct LabeledImage {
    Tensor<float> pixels;  // [H,W,3], values in [0,1]
    int label = 0;
};

enum class Provenance { synthetic, ingested, derived };

struct Dataset {
    std::vector<LabeledImage> items;
    std::string name;
    Provenance provenance = Provenance::synthetic;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }

    std::array<std::int64_t, kNumClasses> per_class_counts() const {
        std::array<std::int64_t, kNumClasses> counts{};
        for (const auto& item : items) counts[static_cast<std::size_t>(item.label)]++;
        return counts;
    }
};

inline void check_label(int label) {
    if (label < 0 || label >= kNumClasses)
        throw UsageError("label " + std::to_string(label) + " outside 0.." +
                         std::to_string(kNumClasses - 1));
}

// Stacks the selected images into a [B,H,W,C] batch of the requested scalar.
template <class Scalar>
Tensor<Scalar> make_batch(const Dataset& dataset, std::span<const int> indices) {
    if (indices.empty()) throw UsageError("make_batch: empty index list");
    const auto& first = dataset.items.at(static_cast<std::size_t>(indices[0])).pixels;
    const std::int64_t h = first.dim(0), w = first.dim(1), c = first.dim(2);
    Tensor<Scalar> batch({static_cast<std::int64_t>(indices.size()), h, w, c});
    const std::int64_t stride = h * w * c;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& img = dataset.items.at(static_cast<std::size_t>(indices[i])).pixels;
        if (img.dim(0) != h || img.dim(1) != w || img.dim(2) != c)
            throw ShapeError("make_batch: inconsistent image shapes in dataset");
        for (std::int64_t j = 0; j < stride; ++j)
            batch[static_cast<std::int64_t>(i) * stride + j] = static_cast<Scalar>(img[j]);
    }
    return batch;
}

inline std::vector<int> labels_for(const Dataset& dataset, std::span<const int> indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (int i : indices)
        labels.push_back(dataset.items.at(static_cast<std::size_t>(i)).label);
    return labels;
}

inline std::vector<int> all_indices(const Dataset& dataset) {
    std::vector<int> idx(dataset.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return idx;
}

}  // namespace feddr
