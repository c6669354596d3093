#include <doctest.h>

#include <algorithm>
#include <set>

#include "feddr/checkpoint.hpp"
#include "feddr/split.hpp"
#include "feddr/synthetic.hpp"

using namespace feddr;

namespace {

// multiset fingerprint of dataset items (pixel bytes + label)
std::multiset<std::string> fingerprint(const Dataset& ds) {
    std::multiset<std::string> out;
    for (const auto& item : ds.items) {
        std::string key(reinterpret_cast<const char*>(item.pixels.data()),
                        sizeof(float) * static_cast<std::size_t>(item.pixels.size()));
        key.push_back(static_cast<char>('0' + item.label));
        out.insert(std::move(key));
    }
    return out;
}

std::multiset<std::string> merge(std::initializer_list<const Dataset*> parts) {
    std::multiset<std::string> out;
    for (const Dataset* p : parts)
        for (const auto& key : fingerprint(*p)) out.insert(key);
    return out;
}

Dataset single_class_dataset(int n) {
    Dataset ds = generate_synthetic({static_cast<std::int64_t>(n), 0, 0, 0, 0}, 32, 17);
    return ds;
}

}  // namespace

TEST_CASE("100 items with default fractions split 81/9/10") {
    Dataset ds = single_class_dataset(100);
    SplitResult parts = split(ds, SplitSpec{});
    CHECK(parts.test.size() == 10);
    CHECK(parts.validation.size() == 9);
    CHECK(parts.train.size() == 81);
}

TEST_CASE("split is a disjoint exhaustive partition") {
    Dataset ds = generate_synthetic({20, 15, 12, 9, 14}, 32, 4);
    SplitResult parts = split(ds, SplitSpec{0.1, 0.1, 5});
    CHECK(parts.train.size() + parts.validation.size() + parts.test.size() == ds.size());
    CHECK(merge({&parts.train, &parts.validation, &parts.test}) == fingerprint(ds));
}

TEST_CASE("test proportions match per-class proportions within one item") {
    Dataset ds = generate_synthetic({40, 30, 20, 10, 20}, 32, 6);
    SplitResult parts = split(ds, SplitSpec{0.1, 0.1, 7});
    auto whole = ds.per_class_counts();
    auto test_counts = parts.test.per_class_counts();
    for (int c = 0; c < 5; ++c) {
        const double expected = 0.1 * static_cast<double>(whole[static_cast<std::size_t>(c)]);
        CHECK(std::fabs(test_counts[static_cast<std::size_t>(c)] - expected) <= 1.0);
    }
}

TEST_CASE("split determinism and seed sensitivity") {
    Dataset ds = generate_synthetic({12, 12, 12, 12, 12}, 32, 8);
    SplitResult a = split(ds, SplitSpec{0.1, 0.1, 9});
    SplitResult b = split(ds, SplitSpec{0.1, 0.1, 9});
    SplitResult c = split(ds, SplitSpec{0.1, 0.1, 10});
    CHECK(fingerprint(a.test) == fingerprint(b.test));
    CHECK(fingerprint(a.train) == fingerprint(b.train));
    CHECK(fingerprint(a.test) != fingerprint(c.test));
}

TEST_CASE("split input validation") {
    Dataset tiny = single_class_dataset(9);
    CHECK_THROWS_AS(split(tiny, SplitSpec{}), UsageError);
    Dataset ds = single_class_dataset(20);
    CHECK_THROWS_AS(split(ds, SplitSpec{0.0, 0.1, 1}), ConfigError);
    CHECK_THROWS_AS(split(ds, SplitSpec{0.5, 1.0, 1}), ConfigError);
    // fractions so extreme a class would lose its whole train part
    CHECK_THROWS_AS(split(ds, SplitSpec{0.95, 0.9, 1}), ConfigError);
}

TEST_CASE("five folds of 100 items hold 20 validation items each") {
    Dataset ds = single_class_dataset(100);
    auto folds = kfold(ds, 5, 3);
    REQUIRE(folds.size() == 5);
    for (const auto& [train, val] : folds) {
        CHECK(val.size() == 20);
        CHECK(train.size() == 80);
    }
}

TEST_CASE("kfold validation folds partition the dataset") {
    Dataset ds = generate_synthetic({11, 9, 13, 7, 10}, 32, 12);
    auto folds = kfold(ds, 5, 4);
    std::multiset<std::string> all_val;
    for (const auto& [train, val] : folds) {
        // fold-local partition: train + val == dataset
        CHECK(merge({&train, &val}) == fingerprint(ds));
        for (const auto& key : fingerprint(val)) all_val.insert(key);
    }
    // every item appears in exactly one validation fold
    CHECK(all_val == fingerprint(ds));
}

TEST_CASE("kfold is deterministic and validates k") {
    Dataset ds = generate_synthetic({8, 8, 8, 8, 8}, 32, 13);
    auto a = kfold(ds, 4, 21);
    auto b = kfold(ds, 4, 21);
    for (std::size_t f = 0; f < a.size(); ++f)
        CHECK(fingerprint(a[f].second) == fingerprint(b[f].second));

    CHECK_THROWS_AS(kfold(ds, 1, 0), UsageError);
    CHECK_THROWS_AS(kfold(ds, 9, 0), ConfigError);  // class count 8 < k
}
