#pragma once

#include <algorithm>
#include <array>
#include <numeric>

#include "feddr/checkpoint.hpp"
#include "feddr/dataset.hpp"
#include "feddr/model.hpp"

namespace feddr {

// ---------------------------------------------------------------------------
// Evaluation metrics: accuracy, 5x5 confusion matrix (rows = true class,
// columns = predicted) and macro one-vs-rest ROC-AUC.
// ---------------------------------------------------------------------------

using Confusion = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

struct EvaluationReport {
    double accuracy = 0.0;
    double macro_roc_auc = 0.0;
    Confusion confusion{};
    std::int64_t n_samples = 0;
    std::int64_t model_size_bytes = 0;
};

// argmax with ties resolved to the lowest class index
template <class Scalar>
int argmax_row(const Tensor<Scalar>& probs, std::int64_t row) {
    const std::int64_t f = probs.dim(1);
    int best = 0;
    Scalar best_v = probs[row * f];
    for (std::int64_t j = 1; j < f; ++j) {
        if (probs[row * f + j] > best_v) {
            best_v = probs[row * f + j];
            best = static_cast<int>(j);
        }
    }
    return best;
}

// One-vs-rest AUC for class `cls` via the rank statistic; ties contribute 1/2.
template <class Scalar>
double roc_auc_one_vs_rest(const Tensor<Scalar>& scores, const std::vector<int>& labels,
                           int cls) {
    const std::int64_t n = scores.dim(0), f = scores.dim(1);
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return scores[a * f + cls] < scores[b * f + cls];
    });

    std::int64_t n_pos = 0;
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() &&
               scores[order[j + 1] * f + cls] == scores[order[i] * f + cls])
            ++j;
        // average rank of the tie group, ranks are 1-based
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[static_cast<std::size_t>(order[k])] == cls) {
                ++n_pos;
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    const std::int64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return -1.0;  // undefined for this class
    return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// macro average over the classes present in the labels
template <class Scalar>
double roc_auc_macro(const Tensor<Scalar>& scores, const std::vector<int>& labels) {
    if (scores.rank() != 2 || scores.dim(1) != kNumClasses)
        throw ShapeError("roc_auc_macro: scores must be [N,5]");
    if (scores.dim(0) < 1 || labels.size() != static_cast<std::size_t>(scores.dim(0)))
        throw UsageError("roc_auc_macro: need one score row per label");
    double sum = 0.0;
    int classes = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const double auc = roc_auc_one_vs_rest(scores, labels, c);
        if (auc >= 0.0) {
            sum += auc;
            ++classes;
        }
    }
    if (classes == 0)
        throw UsageError("roc_auc_macro: AUC undefined, labels hold a single class");
    return sum / classes;
}

// Full evaluation pass: one forward over the test set in eval mode yields
// predictions, confusion, accuracy and macro AUC.
template <class Scalar>
EvaluationReport evaluate(Model<Scalar>& model, const Dataset& test,
                          std::int64_t batch_size = 64) {
    if (test.empty()) throw UsageError("evaluate: empty test set");
    const Mode saved = model.mode;
    model.set_mode(Mode::eval);

    const std::int64_t n = static_cast<std::int64_t>(test.size());
    Tensor<Scalar> scores({n, kNumClasses});
    std::vector<int> labels(static_cast<std::size_t>(n));
    EvaluationReport report;
    report.n_samples = n;
    report.model_size_bytes = model_size_bytes(model);

    std::vector<int> idx;
    for (std::int64_t start = 0; start < n; start += batch_size) {
        const std::int64_t stop = std::min(n, start + batch_size);
        idx.clear();
        for (std::int64_t i = start; i < stop; ++i) idx.push_back(static_cast<int>(i));
        Tensor<Scalar> batch = make_batch<Scalar>(test, idx);
        Tensor<Scalar> probs = forward(model, batch);
        for (std::int64_t i = start; i < stop; ++i) {
            for (int j = 0; j < kNumClasses; ++j)
                scores[i * kNumClasses + j] = probs[(i - start) * kNumClasses + j];
            labels[static_cast<std::size_t>(i)] = test.items[static_cast<std::size_t>(i)].label;
        }
    }

    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const int pred = argmax_row(scores, i);
        const int truth = labels[static_cast<std::size_t>(i)];
        report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)]++;
        if (pred == truth) ++correct;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    bool single_class = true;
    for (std::size_t i = 1; i < labels.size(); ++i)
        if (labels[i] != labels[0]) single_class = false;
    report.macro_roc_auc = single_class ? 0.0 : roc_auc_macro(scores, labels);

    model.set_mode(saved);
    return report;
}

// mean eval-mode cross-entropy plus accuracy over a dataset
template <class Scalar>
std::pair<double, double> validation_loss(Model<Scalar>& model, const Dataset& dataset,
                                          std::int64_t batch_size = 64) {
    if (dataset.empty()) throw UsageError("validation_loss: empty dataset");
    const Mode saved = model.mode;
    model.set_mode(Mode::eval);
    const std::int64_t n = static_cast<std::int64_t>(dataset.size());
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    std::vector<int> idx;
    for (std::int64_t start = 0; start < n; start += batch_size) {
        const std::int64_t stop = std::min(n, start + batch_size);
        idx.clear();
        for (std::int64_t i = start; i < stop; ++i) idx.push_back(static_cast<int>(i));
        Tensor<Scalar> batch = make_batch<Scalar>(dataset, idx);
        std::vector<int> labels = labels_for(dataset, idx);
        Tensor<Scalar> probs = forward(model, batch);
        loss_sum += cross_entropy(probs, labels) * static_cast<double>(stop - start);
        for (std::int64_t i = 0; i < stop - start; ++i)
            if (argmax_row(probs, i) == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    model.set_mode(saved);
    return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace feddr
