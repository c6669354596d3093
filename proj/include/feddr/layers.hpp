#pragma once

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "feddr/tensor.hpp"

namespace feddr {

constexpr int kNumClasses = 5;

// ---------------------------------------------------------------------------
// LayerSpec: declarative description of one layer. conv3x3 is stride-1 with
// zero padding 1 (shape preserving); maxpool2x2 is stride-2 non-overlapping.
// ---------------------------------------------------------------------------

enum class LayerKind : std::uint8_t {
    conv3x3,
    relu,
    maxpool2x2,
    flatten,
    batchnorm,
    dense,
    dropout,
    softmax,
};

struct LayerSpec {
    LayerKind kind{LayerKind::relu};
    int units = 0;       // conv3x3: output channels, dense: output features
    double rate = 0.0;   // dropout keep-out probability

    static LayerSpec conv3x3(int out_channels) { return {LayerKind::conv3x3, out_channels, 0.0}; }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0.0}; }
    static LayerSpec maxpool2x2() { return {LayerKind::maxpool2x2, 0, 0.0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, 0.0}; }
    static LayerSpec batchnorm() { return {LayerKind::batchnorm, 0, 0.0}; }
    static LayerSpec dense(int units) { return {LayerKind::dense, units, 0.0}; }
    static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, rate}; }
    static LayerSpec softmax() { return {LayerKind::softmax, 0, 0.0}; }
};

inline const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv3x3: return "conv3x3";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::flatten: return "flatten";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dense: return "dense";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

// Per-sample data shape flowing between layers: either an image volume
// [h, w, c] or a flat feature vector [f].
struct DataShape {
    bool flat = false;
    std::int64_t h = 0, w = 0, c = 0;
    std::int64_t f = 0;

    static DataShape image(std::int64_t h, std::int64_t w, std::int64_t c) {
        return {false, h, w, c, h * w * c};
    }
    static DataShape features(std::int64_t f) { return {true, 0, 0, 0, f}; }

    std::string str() const {
        if (flat) return "[" + std::to_string(f) + "]";
        return "[" + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c) + "]";
    }
};

// Propagates shapes through the spec list, throwing a ConfigError that names
// the offending layer pair on any incompatibility. Returns the shape *after*
// each layer (index 0 = input shape).
inline std::vector<DataShape> infer_shapes(const std::vector<LayerSpec>& specs,
                                           DataShape input) {
    std::vector<DataShape> shapes;
    shapes.push_back(input);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& spec = specs[i];
        const DataShape& in = shapes.back();
        auto fail = [&](const std::string& why) {
            std::string prev = i == 0 ? std::string("input")
                                      : std::string("layer ") + std::to_string(i - 1) + " (" +
                                            layer_kind_name(specs[i - 1].kind) + ")";
            throw ConfigError("layer " + std::to_string(i) + " (" +
                              layer_kind_name(spec.kind) + ") incompatible with " + prev +
                              " producing " + in.str() + ": " + why);
        };
        switch (spec.kind) {
            case LayerKind::conv3x3:
                if (in.flat) fail("conv3x3 requires an image input");
                if (spec.units <= 0) fail("conv3x3 needs a positive channel count");
                shapes.push_back(DataShape::image(in.h, in.w, spec.units));
                break;
            case LayerKind::relu:
            case LayerKind::dropout:
                if (spec.kind == LayerKind::dropout && (spec.rate < 0.0 || spec.rate >= 1.0))
                    fail("dropout rate must lie in [0,1)");
                shapes.push_back(in);
                break;
            case LayerKind::maxpool2x2:
                if (in.flat) fail("maxpool2x2 requires an image input");
                if (in.h % 2 != 0 || in.w % 2 != 0) fail("maxpool2x2 requires even spatial dims");
                shapes.push_back(DataShape::image(in.h / 2, in.w / 2, in.c));
                break;
            case LayerKind::flatten:
                if (in.flat) fail("flatten requires an image input");
                shapes.push_back(DataShape::features(in.f));
                break;
            case LayerKind::batchnorm:
                if (!in.flat) fail("batchnorm operates on flat features (insert flatten first)");
                shapes.push_back(in);
                break;
            case LayerKind::dense:
                if (!in.flat) fail("dense operates on flat features (insert flatten first)");
                if (spec.units <= 0) fail("dense needs a positive unit count");
                shapes.push_back(DataShape::features(spec.units));
                break;
            case LayerKind::softmax:
                if (!in.flat) fail("softmax operates on flat features");
                shapes.push_back(in);
                break;
        }
    }
    return shapes;
}

// ---------------------------------------------------------------------------
// Layer kernels: explicit forward/backward pairs. Each forward saves what its
// backward needs into a LayerTrace. All math is batched; x carries a leading
// batch dimension.
// ---------------------------------------------------------------------------

template <class Scalar>
struct LayerTrace {
    Tensor<Scalar> input;
    Tensor<Scalar> aux;             // dropout mask / bn x_hat / softmax output
    Tensor<Scalar> aux2;            // bn inv_std
    std::vector<std::int64_t> idx;  // maxpool argmax source offsets
};

// ----- conv3x3, zero padding 1, stride 1 -----------------------------------

// Gathers the 3x3 neighbourhood of every pixel of one image into the rows of
// `patches` ([h*w, 9c]); the convolution is then a single GEMM per image.
template <class Scalar>
void im2col3x3(const Scalar* img, std::int64_t h, std::int64_t w, std::int64_t c,
               Scalar* patches) {
    const std::int64_t row_len = 9 * c;
    for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w; ++j) {
            Scalar* row = patches + (i * w + j) * row_len;
            for (int kh = 0; kh < 3; ++kh) {
                const std::int64_t si = i + kh - 1;
                for (int kw = 0; kw < 3; ++kw) {
                    const std::int64_t sj = j + kw - 1;
                    Scalar* dst = row + (kh * 3 + kw) * c;
                    if (si < 0 || si >= h || sj < 0 || sj >= w) {
                        std::memset(dst, 0, sizeof(Scalar) * static_cast<std::size_t>(c));
                    } else {
                        std::memcpy(dst, img + (si * w + sj) * c,
                                    sizeof(Scalar) * static_cast<std::size_t>(c));
                    }
                }
            }
        }
    }
}

template <class Scalar>
Tensor<Scalar> conv3x3_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                               const Tensor<Scalar>& bias) {
    if (x.rank() != 4) throw ShapeError("conv3x3: input must be [B,H,W,C]");
    const std::int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const std::int64_t k = weight.dim(3);
    if (weight.shape() != std::vector<std::int64_t>{3, 3, c, k})
        throw ShapeError("conv3x3: weight shape mismatch " + weight.shape_str());
    Tensor<Scalar> y({b, h, w, k});
    Tensor<Scalar> patches({h * w, 9 * c});
    auto wm = weight.matrix(9 * c, k);
    auto bias_row = bias.vec().transpose();
    for (std::int64_t n = 0; n < b; ++n) {
        im2col3x3(x.data() + n * h * w * c, h, w, c, patches.data());
        auto ym = typename Tensor<Scalar>::MatrixMap(y.data() + n * h * w * k, h * w, k);
        ym.noalias() = patches.matrix(h * w, 9 * c) * wm;
        ym.rowwise() += bias_row;
    }
    return y;
}

template <class Scalar>
void conv3x3_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& dy, Tensor<Scalar>& dx, Tensor<Scalar>& dweight,
                      Tensor<Scalar>& dbias) {
    const std::int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const std::int64_t k = weight.dim(3);
    dx = Tensor<Scalar>({b, h, w, c});
    dweight = Tensor<Scalar>(weight.shape());
    dbias = Tensor<Scalar>({k});
    Tensor<Scalar> patches({h * w, 9 * c});
    Tensor<Scalar> dpatches({h * w, 9 * c});
    auto wm = weight.matrix(9 * c, k);
    auto dwm = dweight.matrix(9 * c, k);
    for (std::int64_t n = 0; n < b; ++n) {
        im2col3x3(x.data() + n * h * w * c, h, w, c, patches.data());
        auto dym = typename Tensor<Scalar>::ConstMatrixMap(dy.data() + n * h * w * k, h * w, k);
        dwm.noalias() += patches.matrix(h * w, 9 * c).transpose() * dym;
        dbias.vec() += dym.colwise().sum().transpose();
        dpatches.matrix(h * w, 9 * c).noalias() = dym * wm.transpose();
        // col2im: scatter-add patch gradients back to pixels
        Scalar* dxi = dx.data() + n * h * w * c;
        const Scalar* dp = dpatches.data();
        for (std::int64_t i = 0; i < h; ++i) {
            for (std::int64_t j = 0; j < w; ++j) {
                const Scalar* row = dp + (i * w + j) * 9 * c;
                for (int kh = 0; kh < 3; ++kh) {
                    const std::int64_t si = i + kh - 1;
                    if (si < 0 || si >= h) continue;
                    for (int kw = 0; kw < 3; ++kw) {
                        const std::int64_t sj = j + kw - 1;
                        if (sj < 0 || sj >= w) continue;
                        Scalar* dst = dxi + (si * w + sj) * c;
                        const Scalar* src = row + (kh * 3 + kw) * c;
                        for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                    }
                }
            }
        }
    }
}

// ----- relu -----------------------------------------------------------------

template <class Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
    Tensor<Scalar> y(x.shape());
    y.array() = x.array().max(Scalar(0));
    return y;
}

template <class Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) {
    Tensor<Scalar> dx(x.shape());
    dx.array() = (x.array() > Scalar(0)).select(dy.array(), Scalar(0));
    return dx;
}

// ----- maxpool2x2, stride 2 --------------------------------------------------

template <class Scalar>
Tensor<Scalar> maxpool2x2_forward(const Tensor<Scalar>& x, std::vector<std::int64_t>& idx) {
    if (x.rank() != 4) throw ShapeError("maxpool2x2: input must be [B,H,W,C]");
    const std::int64_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h % 2 || w % 2) throw ShapeError("maxpool2x2: spatial dims must be even");
    const std::int64_t oh = h / 2, ow = w / 2;
    Tensor<Scalar> y({b, oh, ow, c});
    idx.assign(static_cast<std::size_t>(b * oh * ow * c), 0);
    const Scalar* in = x.data();
    Scalar* out = y.data();
    for (std::int64_t n = 0; n < b; ++n) {
        for (std::int64_t i = 0; i < oh; ++i) {
            for (std::int64_t j = 0; j < ow; ++j) {
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    // ties resolve to the first candidate in scan order
                    std::int64_t best = ((n * h + 2 * i) * w + 2 * j) * c + ch;
                    Scalar best_v = in[best];
                    const std::int64_t cands[3] = {
                        ((n * h + 2 * i) * w + 2 * j + 1) * c + ch,
                        ((n * h + 2 * i + 1) * w + 2 * j) * c + ch,
                        ((n * h + 2 * i + 1) * w + 2 * j + 1) * c + ch};
                    for (std::int64_t cand : cands) {
                        if (in[cand] > best_v) {
                            best_v = in[cand];
                            best = cand;
                        }
                    }
                    const std::int64_t o = ((n * oh + i) * ow + j) * c + ch;
                    out[o] = best_v;
                    idx[static_cast<std::size_t>(o)] = best;
                }
            }
        }
    }
    return y;
}

template <class Scalar>
Tensor<Scalar> maxpool2x2_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy,
                                   const std::vector<std::int64_t>& idx) {
    Tensor<Scalar> dx(x.shape());
    for (std::int64_t o = 0; o < dy.size(); ++o)
        dx[idx[static_cast<std::size_t>(o)]] += dy[o];
    return dx;
}

// ----- batchnorm over flat features ------------------------------------------

constexpr double kBatchnormEps = 1e-5;
constexpr double kBatchnormMomentum = 0.9;

template <class Scalar>
Tensor<Scalar> batchnorm_forward_train(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                       const Tensor<Scalar>& beta, Tensor<Scalar>& running_mean,
                                       Tensor<Scalar>& running_var, Tensor<Scalar>& x_hat,
                                       Tensor<Scalar>& inv_std) {
    const std::int64_t b = x.dim(0), f = x.dim(1);
    auto xm = x.matrix(b, f);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = xm.colwise().mean().transpose();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> var(f);
    for (std::int64_t j = 0; j < f; ++j)
        var[j] = (xm.col(j).array() - mean[j]).square().sum() / Scalar(b);

    inv_std = Tensor<Scalar>({f});
    inv_std.vec() = (var.array() + Scalar(kBatchnormEps)).rsqrt().matrix();

    x_hat = Tensor<Scalar>({b, f});
    auto xh = x_hat.matrix(b, f);
    xh = (xm.rowwise() - mean.transpose()).array().rowwise() *
         inv_std.vec().transpose().array();

    Tensor<Scalar> y({b, f});
    y.matrix(b, f) = (xh.array().rowwise() * gamma.vec().transpose().array()).rowwise() +
                     beta.vec().transpose().array();

    const Scalar m = Scalar(kBatchnormMomentum);
    running_mean.vec() = m * running_mean.vec() + (Scalar(1) - m) * mean;
    running_var.vec() = m * running_var.vec() + (Scalar(1) - m) * var;
    return y;
}

template <class Scalar>
Tensor<Scalar> batchnorm_forward_eval(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                      const Tensor<Scalar>& beta,
                                      const Tensor<Scalar>& running_mean,
                                      const Tensor<Scalar>& running_var) {
    const std::int64_t b = x.dim(0), f = x.dim(1);
    Eigen::Array<Scalar, Eigen::Dynamic, 1> scale =
        gamma.vec().array() * (running_var.vec().array() + Scalar(kBatchnormEps)).rsqrt();
    Eigen::Array<Scalar, Eigen::Dynamic, 1> shift =
        beta.vec().array() - running_mean.vec().array() * scale;
    Tensor<Scalar> y({b, f});
    y.matrix(b, f) = (x.matrix(b, f).array().rowwise() * scale.transpose().array()).rowwise() +
                     shift.transpose().array();
    return y;
}

template <class Scalar>
void batchnorm_backward(const Tensor<Scalar>& x_hat, const Tensor<Scalar>& inv_std,
                        const Tensor<Scalar>& gamma, const Tensor<Scalar>& dy,
                        Tensor<Scalar>& dx, Tensor<Scalar>& dgamma, Tensor<Scalar>& dbeta) {
    const std::int64_t b = x_hat.dim(0), f = x_hat.dim(1);
    auto xh = x_hat.matrix(b, f);
    auto dym = dy.matrix(b, f);

    dgamma = Tensor<Scalar>({f});
    dbeta = Tensor<Scalar>({f});
    dgamma.vec() = (dym.array() * xh.array()).colwise().sum().matrix().transpose();
    dbeta.vec() = dym.colwise().sum().transpose();

    dx = Tensor<Scalar>({b, f});
    auto dxm = dx.matrix(b, f);
    // dx = gamma * inv_std / B * (B*dy - dbeta - x_hat * dgamma)
    dxm = ((dym * Scalar(b)).array().rowwise() - dbeta.vec().transpose().array()) -
          xh.array().rowwise() * dgamma.vec().transpose().array();
    dxm.array().rowwise() *=
        (gamma.vec().array() * inv_std.vec().array() / Scalar(b)).transpose();
}

// ----- dense ------------------------------------------------------------------

template <class Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                             const Tensor<Scalar>& bias) {
    if (x.rank() != 2) throw ShapeError("dense: input must be [B,F]");
    const std::int64_t b = x.dim(0), in = x.dim(1), out = weight.dim(1);
    if (weight.dim(0) != in) throw ShapeError("dense: weight shape mismatch");
    Tensor<Scalar> y({b, out});
    y.matrix(b, out).noalias() = x.matrix(b, in) * weight.matrix(in, out);
    y.matrix(b, out).rowwise() += bias.vec().transpose();
    return y;
}

template <class Scalar>
void dense_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                    const Tensor<Scalar>& dy, Tensor<Scalar>& dx, Tensor<Scalar>& dweight,
                    Tensor<Scalar>& dbias) {
    const std::int64_t b = x.dim(0), in = x.dim(1), out = weight.dim(1);
    dweight = Tensor<Scalar>(weight.shape());
    dweight.matrix(in, out).noalias() = x.matrix(b, in).transpose() * dy.matrix(b, out);
    dbias = Tensor<Scalar>({out});
    dbias.vec() = dy.matrix(b, out).colwise().sum().transpose();
    dx = Tensor<Scalar>({b, in});
    dx.matrix(b, in).noalias() = dy.matrix(b, out) * weight.matrix(in, out).transpose();
}

// ----- dropout (inverted scaling at train time) --------------------------------

template <class Scalar>
Tensor<Scalar> dropout_forward_train(const Tensor<Scalar>& x, double rate, RngStream& rng,
                                     Tensor<Scalar>& mask) {
    const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
    mask = Tensor<Scalar>(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i)
        mask[i] = rng.bernoulli(rate) ? Scalar(0) : keep_scale;
    Tensor<Scalar> y(x.shape());
    y.array() = x.array() * mask.array();
    return y;
}

template <class Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar>& mask, const Tensor<Scalar>& dy) {
    Tensor<Scalar> dx(dy.shape());
    dx.array() = dy.array() * mask.array();
    return dx;
}

// ----- softmax (rows) -----------------------------------------------------------

template <class Scalar>
Tensor<Scalar> softmax_forward(const Tensor<Scalar>& x) {
    if (x.rank() != 2) throw ShapeError("softmax: input must be [B,F]");
    const std::int64_t b = x.dim(0), f = x.dim(1);
    Tensor<Scalar> y({b, f});
    auto xm = x.matrix(b, f);
    auto ym = y.matrix(b, f);
    for (std::int64_t i = 0; i < b; ++i) {
        const Scalar mx = xm.row(i).maxCoeff();
        ym.row(i) = (xm.row(i).array() - mx).exp();
        ym.row(i) /= ym.row(i).sum();
    }
    return y;
}

template <class Scalar>
Tensor<Scalar> softmax_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& dy) {
    const std::int64_t b = y.dim(0), f = y.dim(1);
    Tensor<Scalar> dx({b, f});
    auto ym = y.matrix(b, f);
    auto dym = dy.matrix(b, f);
    auto dxm = dx.matrix(b, f);
    for (std::int64_t i = 0; i < b; ++i) {
        const Scalar dot = ym.row(i).dot(dym.row(i));
        dxm.row(i) = ym.row(i).array() * (dym.row(i).array() - dot);
    }
    return dx;
}

}  // namespace feddr
