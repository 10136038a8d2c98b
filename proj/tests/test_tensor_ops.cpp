#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rofdec/errors.hpp"
#include "rofdec/ops.hpp"
#include "rofdec/rng.hpp"
#include "testutil.hpp"

using namespace rofdec;

TEST_CASE("tensor shape/value invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK_FALSE(t.has_grad());
    t.ensure_grad();
    CHECK(t.grad.size() == 4);
}

TEST_CASE("conv1d identity kernel") {
    ConvParams p;
    p.kernels = Tensor({1, 1, 3}, {0, 1, 0});
    p.bias = Tensor({1}, {0});
    p.padding = 1;
    Var x = make_var(Tensor({1, 1, 4}, {1, 2, 3, 4}));
    Var y = conv1d_forward(nullptr, x, p);
    CHECK(y->shape == std::vector<int>{1, 1, 4});
    for (int i = 0; i < 4; ++i) CHECK(y->values[i] == doctest::Approx(i + 1.0).epsilon(1e-15));
}

TEST_CASE("conv1d window shape matches the 8-kernel preset layer") {
    ConvParams p;
    p.kernels = testutil::random_tensor({8, 1, 3}, 11);
    p.bias = testutil::random_tensor({8}, 12);
    p.padding = 1;
    Var x = make_var(testutil::random_tensor({5, 1, 16}, 13));
    Var y = conv1d_forward(nullptr, x, p);
    CHECK(y->shape == std::vector<int>{5, 8, 16});
}

TEST_CASE("conv1d matches nested-loop oracle on random draws") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const int b = 1 + static_cast<int>(rng.below(3));
        const int c = 1 + static_cast<int>(rng.below(4));
        const int l = 6 + static_cast<int>(rng.below(10));
        const int n = 1 + static_cast<int>(rng.below(5));
        const int f = 1 + 2 * static_cast<int>(rng.below(3));
        const int pad = static_cast<int>(rng.below(3));
        const int stride = 1 + static_cast<int>(rng.below(2));
        if (l + 2 * pad < f) continue;
        ConvParams p;
        p.kernels = testutil::random_tensor({n, c, f}, 1000 + trial);
        p.bias = testutil::random_tensor({n}, 2000 + trial);
        p.padding = pad;
        p.stride = stride;
        Tensor input = testutil::random_tensor({b, c, l}, 3000 + trial);
        Var y = conv1d_forward(nullptr, make_var(input), p);
        Tensor expect = testutil::conv1d_oracle(input, p.kernels, p.bias, pad, stride);
        REQUIRE(y->shape == expect.shape);
        CHECK(testutil::max_rel_diff(y->values, expect.values) < 1e-10);
    }
}

TEST_CASE("conv1d rejects mismatched axes with a named axis") {
    ConvParams p;
    p.kernels = Tensor({2, 3, 3});
    p.bias = Tensor({2});
    Var x = make_var(Tensor({1, 2, 8}));
    CHECK_THROWS_WITH_AS(conv1d_forward(nullptr, x, p), doctest::Contains("channel axis"), DimensionError);
    ConvParams q;
    q.kernels = Tensor({2, 2, 5});
    q.bias = Tensor({2});
    Var small = make_var(Tensor({1, 2, 3}));
    CHECK_THROWS_WITH_AS(conv1d_forward(nullptr, small, q), doctest::Contains("length axis"), DimensionError);
}

TEST_CASE("dense identity and hand-computed case") {
    Tensor w({2, 2}, {1, 0, 0, 1});
    Tensor b({2}, {0, 0});
    Var x = make_var(Tensor({1, 2}, {5, -7}));
    Var y = dense_forward(nullptr, x, w, b);
    CHECK(y->values[0] == 5.0);
    CHECK(y->values[1] == -7.0);

    Tensor b2({2}, {3, -3});
    Var x2 = make_var(Tensor({1, 2}, {1, 2}));
    Var y2 = dense_forward(nullptr, x2, w, b2);
    CHECK(y2->values[0] == doctest::Approx(4.0));
    CHECK(y2->values[1] == doctest::Approx(-1.0));
}

TEST_CASE("dense matches nested-loop oracle") {
    Tensor input = testutil::random_tensor({5, 7}, 31);
    Tensor w = testutil::random_tensor({7, 2}, 32);
    Tensor b = testutil::random_tensor({2}, 33);
    Var y = dense_forward(nullptr, make_var(input), w, b);
    Tensor expect = testutil::dense_oracle(input, w, b);
    CHECK(testutil::max_rel_diff(y->values, expect.values) < 1e-12);
}

TEST_CASE("dense rejects inner mismatch") {
    Tensor w({3, 2});
    Tensor b({2});
    Var x = make_var(Tensor({1, 4}));
    CHECK_THROWS_AS(dense_forward(nullptr, x, w, b), DimensionError);
}

TEST_CASE("leaky relu values") {
    Var x = make_var(Tensor({1, 1, 3}, {3.0, -1.0, 0.0}));
    Var y = leaky_relu_forward(nullptr, x, 0.2);
    CHECK(y->values[0] == 3.0);
    CHECK(y->values[1] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(y->values[2] == 0.0);
}

TEST_CASE("batchnorm constant input maps to zero") {
    BatchNormState s = make_batchnorm(2);
    Var x = make_var(Tensor({2, 2, 3}, std::vector<double>(12, 5.0)));
    Var y = batchnorm_forward(nullptr, x, s);
    for (double v : y->values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("batchnorm analytic three-point case") {
    BatchNormState s = make_batchnorm(1);
    s.epsilon = 1e-12;
    Var x = make_var(Tensor({1, 1, 3}, {1, 2, 3}));
    Var y = batchnorm_forward(nullptr, x, s);
    // mean 2, population variance 2/3
    CHECK(y->values[0] == doctest::Approx(-1.2247).epsilon(1e-3));
    CHECK(y->values[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(y->values[2] == doctest::Approx(1.2247).epsilon(1e-3));
}

TEST_CASE("batchnorm running mean converges geometrically at rate (1-momentum)") {
    BatchNormState s = make_batchnorm(1);
    const double mu = 4.0;
    Var x = make_var(Tensor({1, 1, 4}, {3, 4, 4, 5}));  // batch mean 4
    const int k = 12;
    for (int i = 0; i < k; ++i) batchnorm_forward(nullptr, x, s, true);
    // closed-form EMA: r_k = mu + (r_0 - mu) * momentum^k with r_0 = 0
    const double expect = mu + (0.0 - mu) * std::pow(s.momentum, k);
    CHECK(s.running_mean[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("batchnorm train mode rejects a single sample per channel") {
    BatchNormState s = make_batchnorm(1);
    Var x = make_var(Tensor({1, 1, 1}, {1.0}));
    CHECK_THROWS_AS(batchnorm_forward(nullptr, x, s), DataError);
}

TEST_CASE("batchnorm infer mode depends only on running statistics") {
    BatchNormState s = make_batchnorm(1);
    s.running_mean = {1.0};
    s.running_var = {4.0};
    s.mode = BnMode::Infer;
    Var a = make_var(Tensor({1, 1, 2}, {3.0, -1.0}));
    Var y = batchnorm_forward(nullptr, a, s);
    CHECK(y->values[0] == doctest::Approx((3.0 - 1.0) / std::sqrt(4.0 + s.epsilon)));
    CHECK(y->values[1] == doctest::Approx((-1.0 - 1.0) / std::sqrt(4.0 + s.epsilon)));
    CHECK(s.running_mean[0] == 1.0);  // untouched
}

TEST_CASE("batchnorm normalizes per channel over batch and length") {
    BatchNormState s = make_batchnorm(3);
    Tensor input = testutil::random_tensor({8, 3, 16}, 55, 2.5);
    Var y = batchnorm_forward(nullptr, make_var(input), s);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (int b = 0; b < 8; ++b)
            for (int l = 0; l < 16; ++l) mean += y->values[(static_cast<std::size_t>(b) * 3 + c) * 16 + l];
        mean /= 8 * 16;
        for (int b = 0; b < 8; ++b)
            for (int l = 0; l < 16; ++l) {
                const double d = y->values[(static_cast<std::size_t>(b) * 3 + c) * 16 + l] - mean;
                var += d * d;
            }
        var /= 8 * 16;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("maxpool hand case and constant case") {
    Var x = make_var(Tensor({1, 1, 4}, {3, 1, 4, 1}));
    Var y = maxpool1d_forward(nullptr, x);
    CHECK(y->values == std::vector<double>{3, 4});

    Var c = make_var(Tensor({1, 2, 8}, std::vector<double>(16, 2.5)));
    Var yc = maxpool1d_forward(nullptr, c);
    CHECK(yc->shape == std::vector<int>{1, 2, 4});
    for (double v : yc->values) CHECK(v == 2.5);
}

TEST_CASE("maxpool tie breaks toward the lowest index") {
    std::vector<int> argmax;
    Var x = make_var(Tensor({1, 1, 4}, {7, 7, 2, 2}));
    maxpool1d_forward(nullptr, x, 2, 2, &argmax);
    CHECK(argmax == std::vector<int>{0, 2});
}

TEST_CASE("maxpool output equals window max; two stages collapse 16 to 4") {
    Tensor input = testutil::random_tensor({3, 8, 16}, 77);
    Var x = make_var(input);
    Var y1 = maxpool1d_forward(nullptr, x);
    CHECK(y1->dim(2) == 8);
    for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 8; ++c)
            for (int t = 0; t < 8; ++t) {
                const double a = input.values[(static_cast<std::size_t>(b) * 8 + c) * 16 + 2 * t];
                const double bb = input.values[(static_cast<std::size_t>(b) * 8 + c) * 16 + 2 * t + 1];
                CHECK(y1->values[(static_cast<std::size_t>(b) * 8 + c) * 8 + t] == std::max(a, bb));
            }
    Var y2 = maxpool1d_forward(nullptr, y1);
    CHECK(y2->dim(2) == 4);
}

TEST_CASE("maxpool rejects window larger than length") {
    Var x = make_var(Tensor({1, 1, 3}));
    CHECK_THROWS_AS(maxpool1d_forward(nullptr, x, 4, 4), DimensionError);
}

TEST_CASE("softmax cross entropy uniform logits give ln 2") {
    Var logits = make_var(Tensor({1, 2}, {0, 0}));
    Tensor labels({1, 2}, {1, 0});
    LossResult r = softmax_cross_entropy(nullptr, logits, labels);
    CHECK(std::abs(r.loss->values[0] - std::log(2.0)) < 1e-12);
    CHECK(r.probabilities.values[0] == doctest::Approx(0.5));
}

TEST_CASE("softmax cross entropy extreme logits stay finite") {
    Var logits = make_var(Tensor({1, 2}, {10, -10}));
    Tensor labels({1, 2}, {1, 0});
    LossResult r = softmax_cross_entropy(nullptr, logits, labels);
    CHECK(r.loss->values[0] == doctest::Approx(std::log(1.0 + std::exp(-20.0))).epsilon(1e-9));
    CHECK(r.loss->values[0] > 0.0);
}

TEST_CASE("softmax cross entropy is the batch mean") {
    Var logits = make_var(Tensor({2, 2}, {0, 0, 0, 0}));
    Tensor labels({2, 2}, {1, 0, 0, 1});
    LossResult r = softmax_cross_entropy(nullptr, logits, labels);
    CHECK(std::abs(r.loss->values[0] - std::log(2.0)) < 1e-12);
}

TEST_CASE("softmax rows sum to one within 1e-12 and loss is non-negative") {
    Rng rng(91);
    Tensor logits = testutil::random_tensor({16, 2}, 92, 4.0);
    Tensor labels({16, 2});
    for (int b = 0; b < 16; ++b) labels.values[static_cast<std::size_t>(b) * 2 + rng.bit()] = 1.0;
    LossResult r = softmax_cross_entropy(nullptr, make_var(logits), labels);
    CHECK(r.loss->values[0] >= 0.0);
    for (int b = 0; b < 16; ++b) {
        const double s = r.probabilities.values[static_cast<std::size_t>(b) * 2] +
                         r.probabilities.values[static_cast<std::size_t>(b) * 2 + 1];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax cross entropy rejects malformed label rows") {
    Var logits = make_var(Tensor({1, 2}, {0, 0}));
    CHECK_THROWS_AS(softmax_cross_entropy(nullptr, logits, Tensor({1, 2}, {0.5, 0.5})), DataError);
    CHECK_THROWS_AS(softmax_cross_entropy(nullptr, logits, Tensor({1, 2}, {1, 1})), DataError);
    CHECK_THROWS_AS(softmax_cross_entropy(nullptr, logits, Tensor({1, 2}, {0, 0})), DataError);
}

TEST_CASE("forward outputs stay finite on random preset-sized batches") {
    ConvParams p;
    p.kernels = testutil::random_tensor({8, 1, 3}, 101);
    p.bias = testutil::random_tensor({8}, 102);
    p.padding = 1;
    Var x = make_var(testutil::random_tensor({16, 1, 16}, 103, 3.0));
    Var y = conv1d_forward(nullptr, x, p);
    CHECK(all_finite(*y));
    BatchNormState s = make_batchnorm(8);
    Var z = batchnorm_forward(nullptr, y, s);
    CHECK(all_finite(*z));
}
