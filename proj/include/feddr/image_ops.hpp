#pragma once

#include <algorithm>
#include <cmath>

#include "feddr/tensor.hpp"

namespace feddr {

inline float clamp01(double v) {
    return static_cast<float>(std::min(1.0, std::max(0.0, v)));
}

// bilinear sample of an [H,W,C] image at continuous (y, x); out-of-bounds
// reads clamp to the edge
inline double bilinear_sample(const Tensor<float>& img, double y, double x, std::int64_t c) {
    const std::int64_t h = img.dim(0), w = img.dim(1), ch = img.dim(2);
    const double yc = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
    const double xc = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(yc));
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(xc));
    const std::int64_t y1 = std::min(y0 + 1, h - 1);
    const std::int64_t x1 = std::min(x0 + 1, w - 1);
    const double fy = yc - static_cast<double>(y0);
    const double fx = xc - static_cast<double>(x0);
    auto at = [&](std::int64_t yy, std::int64_t xx) {
        return static_cast<double>(img[(yy * w + xx) * ch + c]);
    };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
           fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

inline Tensor<float> bilinear_resize(const Tensor<float>& img, std::int64_t out_h,
                                     std::int64_t out_w) {
    const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    if (h == out_h && w == out_w) return img;
    Tensor<float> out({out_h, out_w, c});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::int64_t i = 0; i < out_h; ++i) {
        const double y = (static_cast<double>(i) + 0.5) * sy - 0.5;
        for (std::int64_t j = 0; j < out_w; ++j) {
            const double x = (static_cast<double>(j) + 0.5) * sx - 0.5;
            for (std::int64_t ch = 0; ch < c; ++ch)
                out[(i * out_w + j) * c + ch] = clamp01(bilinear_sample(img, y, x, ch));
        }
    }
    return out;
}

// separable Gaussian filter with edge-replicate padding; kernel_size must be
// odd, sigma > 0. A 1x1 image passes through unchanged.
inline Tensor<float> gaussian_filter(const Tensor<float>& img, double sigma,
                                     int kernel_size) {
    if (kernel_size % 2 == 0 || kernel_size < 1)
        throw ConfigError("gaussian filter kernel size must be odd");
    if (sigma <= 0) throw ConfigError("gaussian filter sigma must be positive");
    const std::int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const int half = kernel_size / 2;
    std::vector<double> kernel(static_cast<std::size_t>(kernel_size));
    double norm = 0;
    for (int t = -half; t <= half; ++t) {
        kernel[static_cast<std::size_t>(t + half)] = std::exp(-0.5 * (t * t) / (sigma * sigma));
        norm += kernel[static_cast<std::size_t>(t + half)];
    }
    for (auto& k : kernel) k /= norm;

    auto clampi = [](std::int64_t v, std::int64_t hi) {
        return std::min(std::max(v, std::int64_t(0)), hi - 1);
    };

    Tensor<float> tmp({h, w, c});
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                double acc = 0;
                for (int t = -half; t <= half; ++t)
                    acc += kernel[static_cast<std::size_t>(t + half)] *
                           img[(i * w + clampi(j + t, w)) * c + ch];
                tmp[(i * w + j) * c + ch] = static_cast<float>(acc);
            }
    Tensor<float> out({h, w, c});
    for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                double acc = 0;
                for (int t = -half; t <= half; ++t)
                    acc += kernel[static_cast<std::size_t>(t + half)] *
                           tmp[(clampi(i + t, h) * w + j) * c + ch];
                out[(i * w + j) * c + ch] = static_cast<float>(acc);
            }
    return out;
}

}  // namespace feddr
