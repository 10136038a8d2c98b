#include <benchmark/benchmark.h>

#include <cstdint>

#include "rofdec/binary.hpp"
#include "rofdec/ops.hpp"
#include "rofdec/rng.hpp"
#include "rofdec/tape.hpp"

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

// BCNN preset middle layer: 64 kernel sets of 1x5 over 48 channels
constexpr int kBatch = 64, kCin = 48, kLen = 8, kNout = 64, kF = 5, kPad = 2;

}  // namespace

static void BM_BinaryConvNaive(benchmark::State& state) {
    const SignTensor x = random_signs({kBatch, kCin, kLen}, 1);
    const SignTensor k = random_signs({kNout, kCin, kF}, 2);
    for (auto _ : state) {
        Tensor out = binary_conv1d(x, k, kPad, 1);
        benchmark::DoNotOptimize(out.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch) * kNout * kLen * kCin * kF);
}
BENCHMARK(BM_BinaryConvNaive);

static void BM_BinaryConvPacked(benchmark::State& state) {
    const SignTensor x = random_signs({kBatch, kCin, kLen}, 1);
    SignTensor k = random_signs({kNout, kCin, kF}, 2);
    k.shape = {kNout, kCin * kF};
    const PackedBits pk = pack(k);
    for (auto _ : state) {
        Tensor out = packed_binary_conv1d(x, pk, kNout, kF, kPad, 1);
        benchmark::DoNotOptimize(out.values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch) * kNout * kLen * kCin * kF);
}
BENCHMARK(BM_BinaryConvPacked);

static void BM_RealConv1dForward(benchmark::State& state) {
    Rng rng(3);
    Tensor xt({kBatch, kCin, kLen});
    for (auto& v : xt.values) v = rng.normal();
    ConvParams p;
    p.kernels = Tensor({kNout, kCin, kF});
    for (auto& v : p.kernels.values) v = rng.normal();
    p.bias = Tensor({kNout});
    p.padding = kPad;
    const Var x = make_var(xt);
    for (auto _ : state) {
        Var y = conv1d_forward(nullptr, x, p);
        benchmark::DoNotOptimize(y->values.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kBatch) * kNout * kLen * kCin * kF);
}
BENCHMARK(BM_RealConv1dForward);

static void BM_XnorPopcountDot(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SignTensor a = random_signs({1, n}, 4);
    SignTensor b = random_signs({1, n}, 5);
    const PackedBits pa = pack(a), pb = pack(b);
    for (auto _ : state) {
        std::int64_t d = xnor_popcount_dot(pa, 0, pb, 0);
        benchmark::DoNotOptimize(d);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_XnorPopcountDot)->Arg(64)->Arg(240)->Arg(512);

BENCHMARK_MAIN();
