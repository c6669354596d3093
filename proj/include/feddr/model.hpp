#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "feddr/layers.hpp"

namespace feddr {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Model: ordered layer specs plus their parameters. Trainable parameters and
// batchnorm running statistics are kept in separate ParameterSets; full_state
// interleaves both in canonical (layer index, then role) order and is the
// unit that checkpoints and federation exchange.
// ---------------------------------------------------------------------------

template <class Scalar>
class Model {
public:
    std::vector<LayerSpec> specs;
    std::array<std::int64_t, 3> input_hwc{64, 64, 3};
    ParameterSet<Scalar> params;  // trainable
    ParameterSet<Scalar> state;   // batchnorm running mean/var
    Mode mode = Mode::eval;

    Model() = default;

    void set_mode(Mode m) { mode = m; }

    void reset_dropout(std::uint64_t seed) { dropout_rng_ = RngStream(seed); }
    RngStream& dropout_rng() { return dropout_rng_; }

    ParameterSet<Scalar> full_state() const;
    void load_full_state(const ParameterSet<Scalar>& full);

private:
    RngStream dropout_rng_{0};
};

namespace detail {

inline std::string layer_prefix(std::size_t layer_index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "l%02zu.", layer_index);
    return buf;
}

// names of the trainable parameters of one layer, in role order
inline std::vector<std::string> trainable_roles(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv3x3: return {"conv.w", "conv.b"};
        case LayerKind::batchnorm: return {"bn.gamma", "bn.beta"};
        case LayerKind::dense: return {"dense.w", "dense.b"};
        default: return {};
    }
}

inline std::vector<std::string> state_roles(LayerKind kind) {
    if (kind == LayerKind::batchnorm) return {"bn.running_mean", "bn.running_var"};
    return {};
}

}  // namespace detail

template <class Scalar>
ParameterSet<Scalar> Model<Scalar>::full_state() const {
    ParameterSet<Scalar> full;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::string prefix = detail::layer_prefix(i);
        for (const auto& role : detail::trainable_roles(specs[i].kind))
            full.add(prefix + role, params.at(prefix + role));
        for (const auto& role : detail::state_roles(specs[i].kind))
            full.add(prefix + role, state.at(prefix + role));
    }
    return full;
}

template <class Scalar>
void Model<Scalar>::load_full_state(const ParameterSet<Scalar>& full) {
    ParameterSet<Scalar> expected = full_state();
    if (!expected.aligned_with(full))
        throw ShapeError("load_full_state: parameter set does not match model architecture");
    for (const auto& item : full) {
        if (params.find(item.name) >= 0)
            params.at(item.name) = item.tensor;
        else
            state.at(item.name) = item.tensor;
    }
}

// ---------------------------------------------------------------------------
// build_model: validates the spec chain against the input size and the
// 5-class output contract, then initializes parameters deterministically from
// the seed (He-scaled uniform for conv/dense weights, zeros for biases,
// ones/zeros for batchnorm scale/shift).
// ---------------------------------------------------------------------------

template <class Scalar>
Model<Scalar> build_model(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                          std::array<std::int64_t, 3> input_hwc = {64, 64, 3}) {
    if (specs.empty()) throw ConfigError("build_model: empty layer list");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].kind == LayerKind::softmax && i + 1 != specs.size())
            throw ConfigError("build_model: softmax must be the terminal layer");
    }
    if (specs.back().kind != LayerKind::softmax)
        throw ConfigError("build_model: the terminal layer must be softmax");

    auto shapes =
        infer_shapes(specs, DataShape::image(input_hwc[0], input_hwc[1], input_hwc[2]));
    if (shapes.back().f != kNumClasses)
        throw ConfigError("build_model: final layer must produce " +
                          std::to_string(kNumClasses) + " classes, got " +
                          std::to_string(shapes.back().f));

    Model<Scalar> model;
    model.specs = specs;
    model.input_hwc = input_hwc;
    model.reset_dropout(mix64(seed ^ fnv1a64("dropout")));

    RngStream init = RngStream(seed).fork("init");
    auto he_uniform = [&](Tensor<Scalar>& t, std::int64_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::int64_t i = 0; i < t.size(); ++i)
            t[i] = static_cast<Scalar>(init.uniform(-limit, limit));
    };

    for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::string prefix = detail::layer_prefix(i);
        const DataShape& in = shapes[i];
        switch (specs[i].kind) {
            case LayerKind::conv3x3: {
                Tensor<Scalar> w({3, 3, in.c, specs[i].units});
                he_uniform(w, 9 * in.c);
                model.params.add(prefix + "conv.w", std::move(w));
                model.params.add(prefix + "conv.b", Tensor<Scalar>({specs[i].units}));
                break;
            }
            case LayerKind::batchnorm: {
                model.params.add(prefix + "bn.gamma", Tensor<Scalar>::ones({in.f}));
                model.params.add(prefix + "bn.beta", Tensor<Scalar>({in.f}));
                model.state.add(prefix + "bn.running_mean", Tensor<Scalar>({in.f}));
                model.state.add(prefix + "bn.running_var", Tensor<Scalar>::ones({in.f}));
                break;
            }
            case LayerKind::dense: {
                Tensor<Scalar> w({in.f, specs[i].units});
                he_uniform(w, in.f);
                model.params.add(prefix + "dense.w", std::move(w));
                model.params.add(prefix + "dense.b", Tensor<Scalar>({specs[i].units}));
                break;
            }
            default:
                break;
        }
    }
    return model;
}

// The default trunk-plus-head architecture: a small convolutional trunk with
// `conv_blocks` conv/relu/maxpool stages, then the classifier head
// (batchnorm, dense, dropout 0.45, dense, softmax).
inline std::vector<LayerSpec> default_specs(int conv_blocks = 2, int head_units = 64,
                                            double dropout_rate = 0.45) {
    std::vector<LayerSpec> specs;
    int channels = 8;
    for (int i = 0; i < conv_blocks; ++i) {
        specs.push_back(LayerSpec::conv3x3(channels));
        specs.push_back(LayerSpec::relu());
        specs.push_back(LayerSpec::maxpool2x2());
        channels *= 2;
    }
    specs.push_back(LayerSpec::flatten());
    specs.push_back(LayerSpec::batchnorm());
    specs.push_back(LayerSpec::dense(head_units));
    specs.push_back(LayerSpec::dropout(dropout_rate));
    specs.push_back(LayerSpec::dense(kNumClasses));
    specs.push_back(LayerSpec::softmax());
    return specs;
}

// ---------------------------------------------------------------------------
// Forward / loss / gradients
// ---------------------------------------------------------------------------

template <class Scalar>
struct ForwardTrace {
    std::vector<LayerTrace<Scalar>> layers;
};

template <class Scalar>
Tensor<Scalar> forward(Model<Scalar>& model, const Tensor<Scalar>& batch,
                       ForwardTrace<Scalar>* trace = nullptr) {
    if (batch.rank() != 4 || batch.dim(1) != model.input_hwc[0] ||
        batch.dim(2) != model.input_hwc[1] || batch.dim(3) != model.input_hwc[2])
        throw ShapeError("forward: batch shape " + batch.shape_str() +
                         " does not match model input");
    const bool train = model.mode == Mode::train;
    if (trace) trace->layers.assign(model.specs.size(), {});

    Tensor<Scalar> x = batch;
    for (std::size_t i = 0; i < model.specs.size(); ++i) {
        const LayerSpec& spec = model.specs[i];
        const std::string prefix = detail::layer_prefix(i);
        LayerTrace<Scalar> local;
        LayerTrace<Scalar>& t = trace ? trace->layers[i] : local;
        switch (spec.kind) {
            case LayerKind::conv3x3:
                if (trace) t.input = x;
                x = conv3x3_forward(x, model.params.at(prefix + "conv.w"),
                                    model.params.at(prefix + "conv.b"));
                break;
            case LayerKind::relu:
                if (trace) t.input = x;
                x = relu_forward(x);
                break;
            case LayerKind::maxpool2x2: {
                if (trace) t.input = x;
                std::vector<std::int64_t> idx;
                x = maxpool2x2_forward(x, idx);
                if (trace) t.idx = std::move(idx);
                break;
            }
            case LayerKind::flatten:
                if (trace) t.input = x;
                x = x.reshaped({x.dim(0), x.size() / x.dim(0)});
                break;
            case LayerKind::batchnorm:
                if (train) {
                    x = batchnorm_forward_train(
                        x, model.params.at(prefix + "bn.gamma"),
                        model.params.at(prefix + "bn.beta"),
                        model.state.at(prefix + "bn.running_mean"),
                        model.state.at(prefix + "bn.running_var"), t.aux, t.aux2);
                } else {
                    x = batchnorm_forward_eval(x, model.params.at(prefix + "bn.gamma"),
                                               model.params.at(prefix + "bn.beta"),
                                               model.state.at(prefix + "bn.running_mean"),
                                               model.state.at(prefix + "bn.running_var"));
                }
                break;
            case LayerKind::dense:
                if (trace) t.input = x;
                x = dense_forward(x, model.params.at(prefix + "dense.w"),
                                  model.params.at(prefix + "dense.b"));
                break;
            case LayerKind::dropout:
                if (train)
                    x = dropout_forward_train(x, spec.rate, model.dropout_rng(), t.aux);
                break;
            case LayerKind::softmax:
                x = softmax_forward(x);
                if (trace) t.aux = x;
                break;
        }
    }
    return x;
}

// Mean categorical cross-entropy of predicted probability rows against labels,
// with the gradient with respect to the probabilities.
template <class Scalar>
double cross_entropy(const Tensor<Scalar>& probs, const std::vector<int>& labels,
                     Tensor<Scalar>* dprobs = nullptr) {
    const std::int64_t b = probs.dim(0), f = probs.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != b)
        throw UsageError("cross_entropy: label count does not match batch");
    if (dprobs) *dprobs = Tensor<Scalar>({b, f});
    double loss = 0.0;
    constexpr double tiny = 1e-30;
    for (std::int64_t i = 0; i < b; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= f) throw UsageError("cross_entropy: label out of range");
        const double p = std::max(static_cast<double>(probs[i * f + y]), tiny);
        loss -= std::log(p);
        if (dprobs) (*dprobs)[i * f + y] = static_cast<Scalar>(-1.0 / (p * double(b)));
    }
    return loss / static_cast<double>(b);
}

template <class Scalar>
struct LossAndGrad {
    double loss = 0.0;
    ParameterSet<Scalar> grads;
};

template <class Scalar>
LossAndGrad<Scalar> loss_and_grad(Model<Scalar>& model, const Tensor<Scalar>& batch,
                                  const std::vector<int>& labels) {
    if (batch.dim(0) == 0 || labels.empty())
        throw UsageError("loss_and_grad: empty batch");
    if (model.mode != Mode::train)
        throw UsageError("loss_and_grad: model must be in train mode");

    ForwardTrace<Scalar> trace;
    Tensor<Scalar> probs = forward(model, batch, &trace);

    LossAndGrad<Scalar> out;
    Tensor<Scalar> dy;
    out.loss = cross_entropy(probs, labels, &dy);
    if (!std::isfinite(out.loss)) {
        for (std::size_t i = 0; i < model.specs.size(); ++i) {
            const Tensor<Scalar>& saved =
                i + 1 < model.specs.size() ? trace.layers[i + 1].input : probs;
            if (saved.size() > 0 && !saved.all_finite())
                throw NumericError(std::string("non-finite activation after layer ") +
                                   std::to_string(i) + " (" +
                                   layer_kind_name(model.specs[i].kind) + ")");
        }
        throw NumericError("non-finite loss");
    }

    // gradient tensors aligned with model.params
    for (const auto& item : model.params)
        out.grads.add(item.name, Tensor<Scalar>(item.tensor.shape()));

    for (std::size_t ri = model.specs.size(); ri-- > 0;) {
        const LayerSpec& spec = model.specs[ri];
        const std::string prefix = detail::layer_prefix(ri);
        LayerTrace<Scalar>& t = trace.layers[ri];
        switch (spec.kind) {
            case LayerKind::conv3x3: {
                Tensor<Scalar> dx, dw, db;
                conv3x3_backward(t.input, model.params.at(prefix + "conv.w"), dy, dx, dw, db);
                out.grads.at(prefix + "conv.w") = std::move(dw);
                out.grads.at(prefix + "conv.b") = std::move(db);
                dy = std::move(dx);
                break;
            }
            case LayerKind::relu:
                dy = relu_backward(t.input, dy);
                break;
            case LayerKind::maxpool2x2:
                dy = maxpool2x2_backward(t.input, dy, t.idx);
                break;
            case LayerKind::flatten:
                dy = dy.reshaped(t.input.shape());
                break;
            case LayerKind::batchnorm: {
                Tensor<Scalar> dx, dgamma, dbeta;
                batchnorm_backward(t.aux, t.aux2, model.params.at(prefix + "bn.gamma"), dy,
                                   dx, dgamma, dbeta);
                out.grads.at(prefix + "bn.gamma") = std::move(dgamma);
                out.grads.at(prefix + "bn.beta") = std::move(dbeta);
                dy = std::move(dx);
                break;
            }
            case LayerKind::dense: {
                Tensor<Scalar> dx, dw, db;
                dense_backward(t.input, model.params.at(prefix + "dense.w"), dy, dx, dw, db);
                out.grads.at(prefix + "dense.w") = std::move(dw);
                out.grads.at(prefix + "dense.b") = std::move(db);
                dy = std::move(dx);
                break;
            }
            case LayerKind::dropout:
                dy = dropout_backward(t.aux, dy);
                break;
            case LayerKind::softmax:
                dy = softmax_backward(t.aux, dy);
                break;
        }
    }

    for (const auto& g : out.grads) {
        if (!g.tensor.all_finite())
            throw NumericError("non-finite gradient for " + g.name);
    }
    return out;
}

}  // namespace feddr
