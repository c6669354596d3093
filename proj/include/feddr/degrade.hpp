#pragma once

#include <array>
#include <cmath>

#include "feddr/dataset.hpp"
#include "feddr/image_ops.hpp"

namespace feddr {

// ---------------------------------------------------------------------------
// JPEG-style quality degradation without producing a JPEG file: RGB -> YCbCr,
// 8x8 block DCT, quantization with the standard luminance/chrominance tables
// scaled by the standard quality-factor rule, dequantization, inverse DCT and
// conversion back. Dimensions that are not multiples of 8 are reflect-padded
// internally and cropped back.
// ---------------------------------------------------------------------------

struct DegradeSpec {
    int quality_min = 30;
    int quality_max = 50;

    void validate() const {
        if (quality_min < 1 || quality_min > quality_max || quality_max > 100)
            throw ConfigError("degrade spec requires 1 <= quality_min <= quality_max <= 100");
    }
};

namespace detail {

// ITU-T T.81 Annex K base quantization tables, raster order
constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// the libjpeg quality-factor scaling rule
inline std::array<int, 64> scaled_table(const std::array<int, 64>& base, int quality) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> out{};
    for (int i = 0; i < 64; ++i) {
        const int v = (base[static_cast<std::size_t>(i)] * scale + 50) / 100;
        out[static_cast<std::size_t>(i)] = std::min(255, std::max(1, v));
    }
    return out;
}

struct Dct8 {
    double m[8][8];
    Dct8() {
        for (int i = 0; i < 8; ++i) {
            const double a = i == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int j = 0; j < 8; ++j)
                m[i][j] = a * std::cos((2 * j + 1) * i * M_PI / 16.0);
        }
    }
};

inline const Dct8& dct8() {
    static const Dct8 instance;
    return instance;
}

// quantization round-trip of one 8x8 block (values centred on zero)
inline void quantize_block(double block[8][8], const std::array<int, 64>& table) {
    const Dct8& d = dct8();
    double tmp[8][8], coef[8][8];
    // coef = D * block * D^T
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int k = 0; k < 8; ++k) acc += d.m[i][k] * block[k][j];
            tmp[i][j] = acc;
        }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int k = 0; k < 8; ++k) acc += tmp[i][k] * d.m[j][k];
            const double q = table[static_cast<std::size_t>(i * 8 + j)];
            coef[i][j] = std::nearbyint(acc / q) * q;
        }
    // block = D^T * coef * D
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int k = 0; k < 8; ++k) acc += d.m[k][i] * coef[k][j];
            tmp[i][j] = acc;
        }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            double acc = 0;
            for (int k = 0; k < 8; ++k) acc += tmp[i][k] * d.m[k][j];
            block[i][j] = acc;
        }
}

// reflect index into [0, n)
inline std::int64_t reflect(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

inline void quantize_plane(std::vector<double>& plane, std::int64_t h, std::int64_t w,
                           const std::array<int, 64>& table) {
    const std::int64_t bh = (h + 7) / 8, bw = (w + 7) / 8;
    double block[8][8];
    std::vector<double> out(plane.size());
    for (std::int64_t by = 0; by < bh; ++by)
        for (std::int64_t bx = 0; bx < bw; ++bx) {
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) {
                    const std::int64_t y = reflect(by * 8 + i, h);
                    const std::int64_t x = reflect(bx * 8 + j, w);
                    block[i][j] = plane[static_cast<std::size_t>(y * w + x)] - 128.0;
                }
            quantize_block(block, table);
            for (int i = 0; i < 8; ++i) {
                const std::int64_t y = by * 8 + i;
                if (y >= h) continue;
                for (int j = 0; j < 8; ++j) {
                    const std::int64_t x = bx * 8 + j;
                    if (x >= w) continue;
                    out[static_cast<std::size_t>(y * w + x)] = block[i][j] + 128.0;
                }
            }
        }
    plane = std::move(out);
}

}  // namespace detail

// deterministic core: the quality-q round-trip of one image
inline Tensor<float> jpeg_quality_roundtrip(const Tensor<float>& pixels, int quality) {
    if (quality < 1 || quality > 100) throw ConfigError("quality must lie in [1,100]");
    const std::int64_t h = pixels.dim(0), w = pixels.dim(1);
    if (pixels.dim(2) != 3) throw ShapeError("jpeg_quality_roundtrip expects [H,W,3]");

    std::vector<double> yp(static_cast<std::size_t>(h * w));
    std::vector<double> cb(yp.size()), cr(yp.size());
    for (std::int64_t i = 0; i < h * w; ++i) {
        const double r = pixels[i * 3 + 0] * 255.0;
        const double g = pixels[i * 3 + 1] * 255.0;
        const double b = pixels[i * 3 + 2] * 255.0;
        yp[static_cast<std::size_t>(i)] = 0.299 * r + 0.587 * g + 0.114 * b;
        cb[static_cast<std::size_t>(i)] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
        cr[static_cast<std::size_t>(i)] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    }

    const auto luma = detail::scaled_table(detail::kLumaBase, quality);
    const auto chroma = detail::scaled_table(detail::kChromaBase, quality);
    detail::quantize_plane(yp, h, w, luma);
    detail::quantize_plane(cb, h, w, chroma);
    detail::quantize_plane(cr, h, w, chroma);

    Tensor<float> out({h, w, 3});
    for (std::int64_t i = 0; i < h * w; ++i) {
        const double yy = yp[static_cast<std::size_t>(i)];
        const double pb = cb[static_cast<std::size_t>(i)] - 128.0;
        const double pr = cr[static_cast<std::size_t>(i)] - 128.0;
        out[i * 3 + 0] = clamp01((yy + 1.402 * pr) / 255.0);
        out[i * 3 + 1] = clamp01((yy - 0.344136 * pb - 0.714136 * pr) / 255.0);
        out[i * 3 + 2] = clamp01((yy + 1.772 * pb) / 255.0);
    }
    return out;
}

inline LabeledImage degrade_quality(const LabeledImage& image, const DegradeSpec& spec,
                                    RngStream& rng) {
    spec.validate();
    const int q = static_cast<int>(rng.uniform_int(spec.quality_min, spec.quality_max));
    return {jpeg_quality_roundtrip(image.pixels, q), image.label};
}

}  // namespace feddr
