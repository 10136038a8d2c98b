#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <limits>

#include "rofdec/binary.hpp"
#include "rofdec/errors.hpp"
#include "rofdec/ops.hpp"
#include "rofdec/rng.hpp"
#include "testutil.hpp"

using namespace rofdec;

namespace {

SignTensor random_signs(std::vector<int> shape, std::uint64_t seed) {
    Rng rng(seed);
    SignTensor s;
    s.shape = std::move(shape);
    std::size_t n = 1;
    for (int d : s.shape) n *= static_cast<std::size_t>(d);
    s.signs.resize(n);
    for (auto& v : s.signs) v = rng.bit() ? 1 : -1;
    return s;
}

// +1-padded real view of a sign tensor, for the real-arithmetic oracle
Tensor plus_padded(const SignTensor& s, int pad) {
    const int b = s.dim(0), c = s.dim(1), l = s.dim(2);
    Tensor t({b, c, l + 2 * pad}, std::vector<double>(static_cast<std::size_t>(b) * c * (l + 2 * pad), 1.0));
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < l; ++i)
                t.values[(static_cast<std::size_t>(bi) * c + ci) * (l + 2 * pad) + pad + i] =
                    s.signs[(static_cast<std::size_t>(bi) * c + ci) * l + i];
    return t;
}

}  // namespace

TEST_CASE("msb sign extraction") {
    CHECK(msb(0.7) == 1);
    CHECK(msb(-0.3) == -1);
    CHECK(msb(0.0) == 1);
    CHECK(msb(-0.0) == 1);  // ties resolve to +1
    CHECK_THROWS_AS(msb(std::numeric_limits<double>::quiet_NaN()), NumericError);
}

TEST_CASE("binarize is elementwise msb and idempotent") {
    Tensor t({1, 1, 3}, {0.5, -2.0, 0.0});
    SignTensor s = binarize(t);
    CHECK(s.signs == std::vector<std::int8_t>{1, -1, 1});
    SignTensor again = binarize(sign_to_tensor(s));
    CHECK(again.signs == s.signs);
}

TEST_CASE("binarizing a beta-free batchnorm output flips exactly the below-mean elements") {
    BatchNormState bn = make_batchnorm(1);
    Tensor input = testutil::random_tensor({4, 1, 8}, 17, 2.0);
    Var y = batchnorm_forward(nullptr, make_var(input), bn);
    double mean = 0.0;
    for (double v : input.values) mean += v;
    mean /= static_cast<double>(input.numel());
    SignTensor s = binarize(*y);
    for (std::size_t i = 0; i < input.numel(); ++i)
        CHECK(static_cast<int>(s.signs[i]) == (input.values[i] >= mean ? 1 : -1));
}

TEST_CASE("binary conv all-agree and self-correlation cases") {
    SignTensor ones;
    ones.shape = {1, 1, 8};
    ones.signs.assign(8, 1);
    SignTensor kern;
    kern.shape = {1, 1, 5};
    kern.signs.assign(5, 1);
    Tensor out = binary_conv1d(ones, kern, 0, 1);
    for (double v : out.values) CHECK(v == 5.0);

    SignTensor x = random_signs({1, 4, 5}, 3);
    SignTensor k;
    k.shape = {1, 4, 5};
    k.signs = x.signs;
    Tensor peak = binary_conv1d(x, k, 0, 1);
    CHECK(peak.values[0] == 20.0);  // c_in * f
}

TEST_CASE("binary conv equals real conv on +/-1 values, exactly") {
    for (int trial = 0; trial < 50; ++trial) {
        SignTensor x = random_signs({2, 4, 12}, 100 + trial);
        SignTensor k = random_signs({3, 4, 5}, 200 + trial);
        Tensor bin = binary_conv1d(x, k, 0, 1);
        ConvParams p;
        p.kernels = sign_to_tensor(k);
        p.bias = Tensor();
        Var real = conv1d_forward(nullptr, make_var(sign_to_tensor(x)), p);
        CHECK(bin.values == real->values);
    }
}

TEST_CASE("binary conv +1 padding matches an explicitly padded real conv") {
    for (int trial = 0; trial < 20; ++trial) {
        SignTensor x = random_signs({2, 3, 9}, 300 + trial);
        SignTensor k = random_signs({4, 3, 5}, 400 + trial);
        const int pad = 2;
        Tensor bin = binary_conv1d(x, k, pad, 1);
        ConvParams p;
        p.kernels = sign_to_tensor(k);
        p.bias = Tensor();
        Var real = conv1d_forward(nullptr, make_var(plus_padded(x, pad)), p);
        CHECK(bin.values == real->values);
    }
}

TEST_CASE("binary conv output parity equals c_in * f") {
    SignTensor x = random_signs({2, 3, 10}, 55);
    SignTensor k = random_signs({4, 3, 3}, 56);
    Tensor out = binary_conv1d(x, k, 1, 1);
    const int cf = 3 * 3;
    for (double v : out.values) {
        const long long iv = static_cast<long long>(v);
        CHECK(std::abs(iv) <= cf);
        CHECK(((iv - cf) % 2) == 0);
    }
}

TEST_CASE("pack bit layout, saturation, and round trip") {
    SignTensor s;
    s.shape = {1, 4};
    s.signs = {1, -1, 1, 1};
    PackedBits p = pack(s);
    CHECK(p.rows == 1);
    CHECK(p.row_bits == 4);
    CHECK(p.words[0] == 0b1101ull);  // bit 0 = first element
    SignTensor u = unpack(p);
    CHECK(u.signs == s.signs);

    SignTensor ones;
    ones.shape = {1, 64};
    ones.signs.assign(64, 1);
    CHECK(pack(ones).words[0] == ~0ull);

    for (int trial = 0; trial < 1000; ++trial) {
        Rng rng(700 + trial);
        const int n = 1 + static_cast<int>(rng.below(130));
        SignTensor r = random_signs({1, n}, 900 + trial);
        CHECK(unpack(pack(r)).signs == r.signs);
    }
}

TEST_CASE("pack keeps padding bits zero") {
    SignTensor s = random_signs({3, 70}, 60);
    const PackedBits p = pack(s);
    for (int r = 0; r < 3; ++r) {
        const std::uint64_t tail = p.row(r)[1] >> (70 - 64);
        CHECK(tail == 0ull);
    }
}

TEST_CASE("xnor popcount dot hand cases") {
    SignTensor a;
    a.shape = {1, 4};
    a.signs = {1, 1, -1, 1};
    SignTensor b;
    b.shape = {1, 4};
    b.signs = {1, -1, -1, 1};
    CHECK(xnor_popcount_dot(pack(a), 0, pack(b), 0) == 2);  // 3 agreements

    SignTensor self = random_signs({1, 64}, 61);
    CHECK(xnor_popcount_dot(pack(self), 0, pack(self), 0) == 64);
}

TEST_CASE("xnor popcount identity exhaustive for n <= 16") {
    // enumerate every agreement pattern; construct b from a flipped by it
    for (int n = 1; n <= 16; ++n) {
        SignTensor a = random_signs({1, n}, 4000 + n);
        const PackedBits pa = pack(a);
        for (std::uint32_t pattern = 0; pattern < (1u << n); ++pattern) {
            SignTensor b = a;
            int agree = 0;
            for (int i = 0; i < n; ++i) {
                if (pattern & (1u << i)) {
                    ++agree;
                } else {
                    b.signs[static_cast<std::size_t>(i)] = -b.signs[static_cast<std::size_t>(i)];
                }
            }
            const std::int64_t dot = xnor_popcount_dot(pa, 0, pack(b), 0);
            CHECK(dot == 2 * agree - n);
            if (dot != 2 * agree - n) return;  // avoid flooding on failure
        }
    }
}

TEST_CASE("xnor popcount dot equals naive dot on random draws up to 512") {
    Rng rng(62);
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(512));
        SignTensor a = random_signs({1, n}, 5000 + trial);
        SignTensor b = random_signs({1, n}, 6000 + trial);
        const std::int64_t expect = testutil::sign_dot_oracle(a.signs, b.signs);
        const std::int64_t got = xnor_popcount_dot(pack(a), 0, pack(b), 0);
        CHECK(got == expect);
        if (got != expect) return;
    }
}

TEST_CASE("xnor popcount dot rejects mismatched element counts") {
    SignTensor a = random_signs({1, 8}, 63);
    SignTensor b = random_signs({1, 9}, 64);
    CHECK_THROWS_AS(xnor_popcount_dot(pack(a), 0, pack(b), 0), DimensionError);
}

TEST_CASE("packed conv equals naive binary conv, exactly, padded and not") {
    Rng rng(65);
    for (int trial = 0; trial < 200; ++trial) {
        const int b = 1 + static_cast<int>(rng.below(3));
        const int c = 1 + static_cast<int>(rng.below(8));
        const int l = 5 + static_cast<int>(rng.below(14));
        const int n = 1 + static_cast<int>(rng.below(9));
        const int f = 1 + 2 * static_cast<int>(rng.below(3));
        const int pad = static_cast<int>(rng.below(3));
        if (l + 2 * pad < f) continue;
        SignTensor x = random_signs({b, c, l}, 7000 + trial);
        SignTensor k = random_signs({n, c, f}, 8000 + trial);
        Tensor naive = binary_conv1d(x, k, pad, 1);
        SignTensor kflat = k;
        kflat.shape = {n, c * f};
        Tensor packed = packed_binary_conv1d(x, pack(kflat), n, f, pad, 1);
        CHECK(naive.values == packed.values);
    }
}

TEST_CASE("ste gate passes inside the clip window only") {
    Tensor upstream({3}, {2.0, 2.0, -1.5});
    Tensor latent({3}, {0.5, 1.5, -1.0});
    Tensor out = ste_backward(upstream, latent, 1.0);
    CHECK(out.values == std::vector<double>{2.0, 0.0, -1.5});

    Tensor inside({3}, {0.1, -0.9, 0.0});
    Tensor id = ste_backward(upstream, inside, 1.0);
    CHECK(id.values == upstream.values);
}

TEST_CASE("binary dense alignment, sign-flip delta, and packed equivalence") {
    SignTensor x = random_signs({1, 32}, 66);
    SignTensor w;
    w.shape = {32, 1};
    w.signs = x.signs;
    Tensor aligned = binary_dense(x, w);
    CHECK(aligned.values[0] == 32.0);  // fan_in

    SignTensor x2 = x;
    x2.signs[5] = -x2.signs[5];
    Tensor flipped = binary_dense(x2, w);
    CHECK(std::abs(flipped.values[0] - aligned.values[0]) == 2.0);

    // cross-kernel equivalence with the packed dot
    SignTensor wide = random_signs({32, 4}, 67);
    Tensor ref = binary_dense(x, wide);
    SignTensor wt;
    wt.shape = {4, 32};
    wt.signs.resize(32 * 4);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 32; ++i) wt.signs[static_cast<std::size_t>(j) * 32 + i] = wide.signs[static_cast<std::size_t>(i) * 4 + j];
    const PackedBits pw = pack(wt);
    const PackedBits px = pack(x);
    for (int j = 0; j < 4; ++j)
        CHECK(static_cast<double>(xnor_popcount_dot(px, 0, pw, j)) == ref.values[static_cast<std::size_t>(j)]);
}

TEST_CASE("stage collapse: one binarization after the block equals per-stage binarization") {
    // sign(maxpool(lrelu(bn(conv)))) == maxpool-of-signs(bn(conv)) since
    // leaky relu keeps signs and max commutes with sign under msb(0)=+1
    Rng rng(68);
    for (int trial = 0; trial < 25; ++trial) {
        SignTensor xs = random_signs({2, 3, 16}, 9000 + trial);
        SignTensor ks = random_signs({6, 3, 5}, 9100 + trial);
        Tensor conv = binary_conv1d(xs, ks, 2, 1);
        BatchNormState bn = make_batchnorm(6);
        for (auto& v : bn.gamma.values) v = 0.5 + rng.uniform01();
        for (auto& v : bn.beta.values) v = rng.normal() * 0.3;
        Var bn_out = batchnorm_forward(nullptr, make_var(conv), bn);
        Var act = leaky_relu_forward(nullptr, bn_out, 0.2);
        Var pooled = maxpool1d_forward(nullptr, act);
        const SignTensor once = binarize(*pooled);

        // per-stage route: binarize(bn) -> signs survive lrelu -> max of signs
        const SignTensor after_bn = binarize(*bn_out);
        const int b = 2, c = 6, l = 16;
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci)
                for (int t = 0; t < l / 2; ++t) {
                    const std::int8_t s1 = after_bn.signs[(static_cast<std::size_t>(bi) * c + ci) * l + 2 * t];
                    const std::int8_t s2 = after_bn.signs[(static_cast<std::size_t>(bi) * c + ci) * l + 2 * t + 1];
                    const std::int8_t stage = std::max(s1, s2);
                    CHECK(static_cast<int>(once.signs[(static_cast<std::size_t>(bi) * c + ci) * (l / 2) + t]) ==
                          static_cast<int>(stage));
                }
    }
}

TEST_CASE("binary training forward equals packed inference kernels on the sign path") {
    // the tape op in sign mode must produce the same integers as the packed path
    Tensor x = testutil::random_tensor({3, 4, 12}, 70);
    ConvParams latent;
    latent.kernels = testutil::random_tensor({5, 4, 3}, 71, 0.4);
    latent.padding = 1;
    Var y = binary_conv1d_forward(nullptr, make_var(x), latent);
    SignTensor xs = binarize(x);
    SignTensor ks = binarize(latent.kernels);
    SignTensor kflat = ks;
    kflat.shape = {5, 4 * 3};
    Tensor packed = packed_binary_conv1d(xs, pack(kflat), 5, 3, 1, 1);
    CHECK(y->values == packed.values);
}

TEST_CASE("packed path is at least 4x faster than the naive +/-1 path") {
    // BCNN preset middle-layer shape
    const int batch = 256, c = 48, l = 8, n = 64, f = 5, pad = 2;
    SignTensor x = random_signs({batch, c, l}, 72);
    SignTensor k = random_signs({n, c, f}, 73);
    SignTensor kflat = k;
    kflat.shape = {n, c * f};
    const PackedBits pk = pack(kflat);

    // warm up and check agreement once
    Tensor a = binary_conv1d(x, k, pad, 1);
    Tensor b = packed_binary_conv1d(x, pk, n, f, pad, 1);
    REQUIRE(a.values == b.values);

    auto time_it = [](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    const int reps = 6;
    const double naive_s = time_it([&] {
        for (int i = 0; i < reps; ++i) binary_conv1d(x, k, pad, 1);
    });
    const double packed_s = time_it([&] {
        for (int i = 0; i < reps; ++i) packed_binary_conv1d(x, pk, n, f, pad, 1);
    });
    CHECK(naive_s > 4.0 * packed_s);
}
