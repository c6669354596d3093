#pragma once

#include <limits>
#include <optional>

#include "feddr/metrics.hpp"

namespace feddr {

// ---------------------------------------------------------------------------
// Local training loop: shuffled minibatch SGD with plateau learning-rate
// halving and early stopping that restores the weights of the epoch with the
// lowest validation loss.
// ---------------------------------------------------------------------------

constexpr double kImprovementEps = 1e-6;

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double lr_initial = 0.001;
    int lr_halving_patience = 1;   // standalone default; federated mode uses 5
    int early_stop_patience = 10;
    std::uint64_t seed = 0;
    bool restore_best = true;      // federated rounds ship the final weights instead

    void validate() const {
        if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
        if (batch_size < 1 || lr_initial <= 0 || lr_halving_patience < 1 ||
            early_stop_patience < 1)
            throw ConfigError("train config: all fields must be positive");
        if (lr_halving_patience > std::max(epochs, 1) ||
            early_stop_patience > std::max(epochs, 1))
            throw ConfigError("train config: patience values must not exceed epochs");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

// Halves the learning rate after `patience` consecutive epochs without a
// validation-loss improvement (improvement = decrease by more than 1e-6).
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, int patience)
        : lr_(initial_lr), patience_(patience) {
        if (initial_lr <= 0) throw ConfigError("scheduler: lr must be positive");
        if (patience < 1) throw ConfigError("scheduler: patience must be >= 1");
    }

    // feeds one validation loss, returns the learning rate now in effect
    double observe(double val_loss) {
        if (val_loss < best_ - kImprovementEps) {
            best_ = val_loss;
            bad_streak_ = 0;
        } else if (++bad_streak_ >= patience_) {
            lr_ /= 2.0;
            bad_streak_ = 0;
        }
        return lr_;
    }

    double lr() const { return lr_; }

private:
    double lr_;
    int patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_streak_ = 0;
};

// Stops after `patience` consecutive non-improving epochs; remembers which
// epoch held the best loss so its snapshot can be restored.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw ConfigError("early stopper: patience must be >= 1");
    }

    // returns true when this epoch improved on the best loss so far
    bool observe(double val_loss) {
        ++epoch_;
        if (val_loss < best_ - kImprovementEps) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            bad_streak_ = 0;
            return true;
        }
        ++bad_streak_;
        return false;
    }

    bool should_stop() const { return bad_streak_ >= patience_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    int patience_;
    int epoch_ = -1;
    int best_epoch_ = -1;
    int bad_streak_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

template <class Scalar>
struct TrainResult {
    std::vector<EpochRecord> history;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
};

// Core loop with an injectable validation measurement; the scripted-sequence
// tests drive the scheduler/stopping machinery through this seam.
template <class Scalar, class ValidateFn>
TrainResult<Scalar> train_local_with(Model<Scalar>& model, const Dataset& train,
                                     const TrainConfig& config, ValidateFn validate) {
    config.validate();
    if (train.empty())
        throw UsageError("train_local: training set must be nonempty");
    if (config.batch_size > static_cast<int>(train.size()))
        throw UsageError("train_local: batch size exceeds training set size");

    TrainResult<Scalar> result;
    if (config.epochs == 0) return result;

    PlateauScheduler scheduler(config.lr_initial, config.lr_halving_patience);
    EarlyStopper stopper(config.early_stop_patience);
    std::optional<ParameterSet<Scalar>> best_state;

    std::vector<int> order = all_indices(train);
    double lr = config.lr_initial;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        model.set_mode(Mode::train);
        model.reset_dropout(mix64(config.seed ^ fnv1a64("dropout")) +
                            static_cast<std::uint64_t>(epoch));
        RngStream shuffle_rng =
            RngStream(config.seed).fork("shuffle", static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        std::int64_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::span<const int> idx(order.data() + start, stop - start);
            Tensor<Scalar> batch = make_batch<Scalar>(train, idx);
            std::vector<int> labels = labels_for(train, idx);
            auto lg = loss_and_grad(model, batch, labels);
            sgd_step_inplace(model.params, lg.grads, lr);
            loss_sum += lg.loss * static_cast<double>(stop - start);
            seen += static_cast<std::int64_t>(stop - start);
        }

        auto [val_loss, val_acc] = validate(model);
        const bool improved = stopper.observe(val_loss);
        if (improved) {
            best_state = model.full_state();
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
        }
        result.history.push_back({epoch, loss_sum / static_cast<double>(seen), val_loss,
                                  val_acc, lr});
        lr = scheduler.observe(val_loss);
        if (stopper.should_stop()) break;
    }

    if (config.restore_best && best_state)
        model.load_full_state(*best_state);
    return result;
}

template <class Scalar>
TrainResult<Scalar> train_local(Model<Scalar>& model, const Dataset& train,
                                const Dataset& validation, const TrainConfig& config) {
    if (validation.empty())
        throw UsageError("train_local: validation set must be nonempty");
    return train_local_with(model, train, config, [&](Model<Scalar>& m) {
        return validation_loss(m, validation);
    });
}

// ---------------------------------------------------------------------------
// Cross-validation: a fresh model per fold from the same seed, so metric
// differences across folds are attributable to the data alone.
// ---------------------------------------------------------------------------

struct CrossvalSummary {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    std::int64_t model_size_bytes = 0;
};

template <class Scalar>
struct CrossvalResult {
    std::vector<EvaluationReport> fold_reports;
    CrossvalSummary summary;
};

template <class Scalar>
CrossvalResult<Scalar> crossval(const std::vector<LayerSpec>& specs, const Dataset& dataset,
                                int k, const TrainConfig& config,
                                std::array<std::int64_t, 3> input_hwc = {64, 64, 3}) {
    if (k < 2) throw UsageError("crossval: k must be at least 2");
    auto folds = kfold(dataset, k, config.seed);

    CrossvalResult<Scalar> result;
    for (auto& [fold_train, fold_val] : folds) {
        Model<Scalar> model = build_model<Scalar>(specs, config.seed, input_hwc);
        train_local(model, fold_train, fold_val, config);
        result.fold_reports.push_back(evaluate(model, fold_val));
    }

    auto mean_std = [&](auto getter) {
        double mean = 0.0;
        for (const auto& r : result.fold_reports) mean += getter(r);
        mean /= static_cast<double>(result.fold_reports.size());
        double var = 0.0;
        for (const auto& r : result.fold_reports) {
            const double d = getter(r) - mean;
            var += d * d;
        }
        var /= static_cast<double>(result.fold_reports.size());
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    std::tie(result.summary.mean_accuracy, result.summary.std_accuracy) =
        mean_std([](const EvaluationReport& r) { return r.accuracy; });
    std::tie(result.summary.mean_auc, result.summary.std_auc) =
        mean_std([](const EvaluationReport& r) { return r.macro_roc_auc; });
    result.summary.model_size_bytes = result.fold_reports.front().model_size_bytes;
    return result;
}

}  // namespace feddr
