#pragma once

#include <algorithm>
#include <cmath>

#include "feddr/dataset.hpp"

namespace feddr {

struct SplitSpec {
    double test_fraction = 0.10;
    double validation_fraction_of_remainder = 0.10;
    std::uint64_t seed = 0;

    void validate() const {
        if (test_fraction <= 0.0 || test_fraction >= 1.0 ||
            validation_fraction_of_remainder <= 0.0 ||
            validation_fraction_of_remainder >= 1.0)
            throw ConfigError("split fractions must lie in (0,1)");
    }
};

struct SplitResult {
    Dataset train, validation, test;
};

namespace detail {

inline Dataset subset(const Dataset& dataset, std::vector<int> indices,
                      const std::string& suffix) {
    std::sort(indices.begin(), indices.end());
    Dataset out;
    out.name = dataset.name.empty() ? suffix : dataset.name + "/" + suffix;
    out.provenance = Provenance::derived;
    out.items.reserve(indices.size());
    for (int i : indices) out.items.push_back(dataset.items[static_cast<std::size_t>(i)]);
    return out;
}

inline std::array<std::vector<int>, kNumClasses> indices_by_class(const Dataset& dataset) {
    std::array<std::vector<int>, kNumClasses> by_class;
    for (std::size_t i = 0; i < dataset.items.size(); ++i)
        by_class[static_cast<std::size_t>(dataset.items[i].label)].push_back(
            static_cast<int>(i));
    return by_class;
}

}  // namespace detail

// Stratified train/validation/test split. Per class, the test part receives
// round(test_fraction * n) items and the validation part
// round(validation_fraction * remainder); both are drawn from a seeded
// shuffle, so the partition is a pure function of (dataset, spec).
inline SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
    spec.validate();
    if (dataset.size() < 10) throw UsageError("split: dataset must hold at least 10 items");

    auto by_class = detail::indices_by_class(dataset);
    RngStream root(spec.seed);
    std::vector<int> train_idx, val_idx, test_idx;
    for (int c = 0; c < kNumClasses; ++c) {
        auto& pool = by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) continue;
        RngStream rng = root.fork("split", static_cast<std::uint64_t>(c));
        rng.shuffle(pool.begin(), pool.end());
        const std::int64_t n = static_cast<std::int64_t>(pool.size());
        const std::int64_t n_test = std::llround(spec.test_fraction * static_cast<double>(n));
        const std::int64_t n_val = std::llround(spec.validation_fraction_of_remainder *
                                                static_cast<double>(n - n_test));
        if (n - n_test - n_val <= 0)
            throw ConfigError("split: class " + std::to_string(c) +
                              " too small to stratify into non-empty train part");
        for (std::int64_t i = 0; i < n; ++i) {
            if (i < n_test)
                test_idx.push_back(pool[static_cast<std::size_t>(i)]);
            else if (i < n_test + n_val)
                val_idx.push_back(pool[static_cast<std::size_t>(i)]);
            else
                train_idx.push_back(pool[static_cast<std::size_t>(i)]);
        }
    }
    return {detail::subset(dataset, std::move(train_idx), "train"),
            detail::subset(dataset, std::move(val_idx), "validation"),
            detail::subset(dataset, std::move(test_idx), "test")};
}

// Stratified k-fold: items of every class are dealt round-robin across folds
// after a seeded shuffle; fold i's validation set is its deal, train is the
// rest.
inline std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& dataset, int k,
                                                      std::uint64_t seed) {
    if (k < 2) throw UsageError("kfold: k must be at least 2");
    if (dataset.size() < static_cast<std::size_t>(k))
        throw UsageError("kfold: dataset smaller than k");

    auto by_class = detail::indices_by_class(dataset);
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& pool = by_class[static_cast<std::size_t>(c)];
        if (!pool.empty() && static_cast<int>(pool.size()) < k)
            throw ConfigError("kfold: class " + std::to_string(c) + " has " +
                              std::to_string(pool.size()) + " items, fewer than k=" +
                              std::to_string(k));
    }

    std::vector<std::vector<int>> fold_idx(static_cast<std::size_t>(k));
    RngStream root(seed);
    for (int c = 0; c < kNumClasses; ++c) {
        auto& pool = by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) continue;
        RngStream rng = root.fork("kfold", static_cast<std::uint64_t>(c));
        rng.shuffle(pool.begin(), pool.end());
        for (std::size_t i = 0; i < pool.size(); ++i)
            fold_idx[i % static_cast<std::size_t>(k)].push_back(pool[i]);
    }

    std::vector<std::pair<Dataset, Dataset>> folds;
    for (int f = 0; f < k; ++f) {
        std::vector<int> train;
        for (int g = 0; g < k; ++g)
            if (g != f)
                train.insert(train.end(), fold_idx[static_cast<std::size_t>(g)].begin(),
                             fold_idx[static_cast<std::size_t>(g)].end());
        folds.emplace_back(
            detail::subset(dataset, std::move(train), "fold" + std::to_string(f) + "-train"),
            detail::subset(dataset, fold_idx[static_cast<std::size_t>(f)],
                           "fold" + std::to_string(f) + "-val"));
    }
    return folds;
}

}  // namespace feddr
