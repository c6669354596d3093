#include <doctest.h>

#include "feddr/layers.hpp"
#include "gradcheck.hpp"

using namespace feddr;

namespace {

// scalar objective: weighted sum of the layer output against fixed weights
double weighted(const Tensor<double>& y, const Tensor<double>& r) {
    return y.vec().dot(r.vec());
}

}  // namespace

TEST_CASE("shape inference names the offending layer pair") {
    std::vector<LayerSpec> specs{LayerSpec::flatten(), LayerSpec::conv3x3(4)};
    try {
        infer_shapes(specs, DataShape::image(8, 8, 3));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("layer 1 (conv3x3)") != std::string::npos);
        CHECK(msg.find("layer 0 (flatten)") != std::string::npos);
    }
}

TEST_CASE("shape inference propagates the default trunk") {
    std::vector<LayerSpec> specs{
        LayerSpec::conv3x3(8),  LayerSpec::relu(),      LayerSpec::maxpool2x2(),
        LayerSpec::conv3x3(16), LayerSpec::relu(),      LayerSpec::maxpool2x2(),
        LayerSpec::flatten(),   LayerSpec::batchnorm(), LayerSpec::dense(64),
        LayerSpec::dropout(0.45), LayerSpec::dense(5),  LayerSpec::softmax()};
    auto shapes = infer_shapes(specs, DataShape::image(64, 64, 3));
    CHECK(shapes.back().f == 5);
    CHECK(shapes[7].f == 16 * 16 * 16);  // after flatten
}

TEST_CASE("conv3x3 gradients match finite differences") {
    RngStream rng(101);
    Tensor<double> x({2, 4, 4, 3}), w({3, 3, 3, 2}), b({2}), r({2, 4, 4, 2});
    gradcheck::fill_uniform(x, rng, -1, 1);
    gradcheck::fill_uniform(w, rng, -0.5, 0.5);
    gradcheck::fill_uniform(b, rng, -0.5, 0.5);
    gradcheck::fill_uniform(r, rng, -1, 1);

    Tensor<double> dx, dw, db;
    conv3x3_backward(x, w, r, dx, dw, db);
    auto loss = [&] { return weighted(conv3x3_forward(x, w, b), r); };
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
    CHECK(gradcheck::max_grad_error(w, dw, loss) < 1e-4);
    CHECK(gradcheck::max_grad_error(b, db, loss) < 1e-4);
}

TEST_CASE("dense gradients match finite differences") {
    RngStream rng(102);
    Tensor<double> x({3, 4}), w({4, 5}), b({5}), r({3, 5});
    gradcheck::fill_uniform(x, rng, -1, 1);
    gradcheck::fill_uniform(w, rng, -1, 1);
    gradcheck::fill_uniform(b, rng, -1, 1);
    gradcheck::fill_uniform(r, rng, -1, 1);

    Tensor<double> dx, dw, db;
    dense_backward(x, w, r, dx, dw, db);
    auto loss = [&] { return weighted(dense_forward(x, w, b), r); };
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
    CHECK(gradcheck::max_grad_error(w, dw, loss) < 1e-4);
    CHECK(gradcheck::max_grad_error(b, db, loss) < 1e-4);
}

TEST_CASE("relu gradient matches finite differences") {
    RngStream rng(103);
    Tensor<double> x({4, 6}), r({4, 6});
    gradcheck::fill_away_from_zero(x, rng);
    gradcheck::fill_uniform(r, rng, -1, 1);
    Tensor<double> dx = relu_backward(x, r);
    auto loss = [&] { return weighted(relu_forward(x), r); };
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
}

TEST_CASE("maxpool2x2 gradient matches finite differences") {
    RngStream rng(104);
    Tensor<double> x({2, 4, 4, 2}), r({2, 2, 2, 2});
    gradcheck::fill_uniform(x, rng, -1, 1);
    gradcheck::fill_uniform(r, rng, -1, 1);
    std::vector<std::int64_t> idx;
    Tensor<double> y = maxpool2x2_forward(x, idx);
    CHECK(y.shape() == std::vector<std::int64_t>{2, 2, 2, 2});
    Tensor<double> dx = maxpool2x2_backward(x, r, idx);
    auto loss = [&] {
        std::vector<std::int64_t> scratch;
        return weighted(maxpool2x2_forward(x, scratch), r);
    };
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
}

TEST_CASE("batchnorm train gradients match finite differences") {
    RngStream rng(105);
    Tensor<double> x({6, 3}), gamma({3}), beta({3}), r({6, 3});
    gradcheck::fill_uniform(x, rng, -2, 2);
    gradcheck::fill_uniform(gamma, rng, 0.5, 1.5);
    gradcheck::fill_uniform(beta, rng, -0.5, 0.5);
    gradcheck::fill_uniform(r, rng, -1, 1);

    auto loss = [&] {
        Tensor<double> rm({3}), rv = Tensor<double>::ones({3}), xh, istd;
        return weighted(batchnorm_forward_train(x, gamma, beta, rm, rv, xh, istd), r);
    };
    Tensor<double> rm({3}), rv = Tensor<double>::ones({3}), xh, istd;
    batchnorm_forward_train(x, gamma, beta, rm, rv, xh, istd);
    Tensor<double> dx, dgamma, dbeta;
    batchnorm_backward(xh, istd, gamma, r, dx, dgamma, dbeta);
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
    CHECK(gradcheck::max_grad_error(gamma, dgamma, loss) < 1e-4);
    CHECK(gradcheck::max_grad_error(beta, dbeta, loss) < 1e-4);
}

TEST_CASE("batchnorm running stats update and eval determinism") {
    Tensor<double> x({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
    Tensor<double> gamma = Tensor<double>::ones({2});
    Tensor<double> beta({2});
    Tensor<double> rm({2}), rv = Tensor<double>::ones({2}), xh, istd;
    batchnorm_forward_train(x, gamma, beta, rm, rv, xh, istd);
    // batch mean (2.5, 25), biased var (1.25, 125); momentum 0.9
    CHECK(rm[0] == doctest::Approx(0.25));
    CHECK(rm[1] == doctest::Approx(2.5));
    CHECK(rv[0] == doctest::Approx(0.9 + 0.125));
    CHECK(rv[1] == doctest::Approx(0.9 + 12.5));
    CHECK(rv[0] > 0);
    CHECK(rv[1] > 0);

    Tensor<double> y1 = batchnorm_forward_eval(x, gamma, beta, rm, rv);
    Tensor<double> y2 = batchnorm_forward_eval(x, gamma, beta, rm, rv);
    CHECK(bitwise_equal(y1, y2));
}

TEST_CASE("softmax rows are positive and sum to one") {
    RngStream rng(106);
    Tensor<double> x({8, 5});
    gradcheck::fill_uniform(x, rng, -30, 30);
    Tensor<double> y = softmax_forward(x);
    for (std::int64_t i = 0; i < 8; ++i) {
        double sum = 0;
        for (std::int64_t j = 0; j < 5; ++j) {
            CHECK(y[i * 5 + j] > 0.0);
            sum += y[i * 5 + j];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("softmax gradient matches finite differences") {
    RngStream rng(107);
    Tensor<double> x({3, 5}), r({3, 5});
    gradcheck::fill_uniform(x, rng, -2, 2);
    gradcheck::fill_uniform(r, rng, -1, 1);
    Tensor<double> y = softmax_forward(x);
    Tensor<double> dx = softmax_backward(y, r);
    auto loss = [&] { return weighted(softmax_forward(x), r); };
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
}

TEST_CASE("dropout gradient matches finite differences for a fixed mask") {
    RngStream rng(108);
    Tensor<double> x({4, 6}), r({4, 6}), mask;
    gradcheck::fill_uniform(x, rng, -1, 1);
    gradcheck::fill_uniform(r, rng, -1, 1);
    RngStream mask_rng(1);
    dropout_forward_train(x, 0.45, mask_rng, mask);
    Tensor<double> dx = dropout_backward(mask, r);
    auto loss = [&] {
        Tensor<double> y(x.shape());
        y.array() = x.array() * mask.array();
        return weighted(y, r);
    };
    CHECK(gradcheck::max_grad_error(x, dx, loss) < 1e-4);
}

TEST_CASE("inverted dropout preserves expectation") {
    Tensor<double> x({1, 20});
    for (int i = 0; i < 20; ++i) x[i] = 0.5 + 0.05 * i;
    RngStream rng(2024);
    Tensor<double> mean({1, 20});
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        Tensor<double> mask;
        Tensor<double> y = dropout_forward_train(x, 0.45, rng, mask);
        mean.vec() += y.vec() / double(trials);
    }
    for (int i = 0; i < 20; ++i)
        CHECK(std::fabs(mean[i] - x[i]) / x[i] < 0.02);
}
