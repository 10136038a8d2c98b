#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rofdec/rng.hpp"
#include "rofdec/tensor.hpp"

namespace testutil {

// Independent triple-nested-loop convolution oracle (zero padding), written
// against the operation contract, not the library code.
inline rofdec::Tensor conv1d_oracle(const rofdec::Tensor& input, const rofdec::Tensor& kernels,
                                    const rofdec::Tensor& bias, int padding, int stride) {
    const int b_n = input.dim(0), c_in = input.dim(1), len = input.dim(2);
    const int n_out = kernels.dim(0), f = kernels.dim(2);
    const int l_out = (len + 2 * padding - f) / stride + 1;
    rofdec::Tensor out({b_n, n_out, l_out});
    for (int b = 0; b < b_n; ++b)
        for (int n = 0; n < n_out; ++n)
            for (int t = 0; t < l_out; ++t) {
                double acc = bias.numel() ? bias.values[static_cast<std::size_t>(n)] : 0.0;
                for (int c = 0; c < c_in; ++c)
                    for (int j = 0; j < f; ++j) {
                        const int i = t * stride - padding + j;
                        if (i < 0 || i >= len) continue;
                        acc += input.values[(static_cast<std::size_t>(b) * c_in + c) * len + i] *
                               kernels.values[(static_cast<std::size_t>(n) * c_in + c) * f + j];
                    }
                out.values[(static_cast<std::size_t>(b) * n_out + n) * l_out + t] = acc;
            }
    return out;
}

// Nested-loop matrix multiply oracle.
inline rofdec::Tensor dense_oracle(const rofdec::Tensor& input, const rofdec::Tensor& w,
                                   const rofdec::Tensor& bias) {
    const int b_n = input.dim(0), d_in = input.dim(1), d_out = w.dim(1);
    rofdec::Tensor out({b_n, d_out});
    for (int b = 0; b < b_n; ++b)
        for (int j = 0; j < d_out; ++j) {
            double acc = bias.numel() ? bias.values[static_cast<std::size_t>(j)] : 0.0;
            for (int i = 0; i < d_in; ++i)
                acc += input.values[static_cast<std::size_t>(b) * d_in + i] *
                       w.values[static_cast<std::size_t>(i) * d_out + j];
            out.values[static_cast<std::size_t>(b) * d_out + j] = acc;
        }
    return out;
}

// Naive +/-1 dot product over sign vectors.
inline std::int64_t sign_dot_oracle(const std::vector<std::int8_t>& a, const std::vector<std::int8_t>& b) {
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<std::int64_t>(a[i]) * b[i];
    return acc;
}

inline rofdec::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double scale = 1.0) {
    rofdec::Rng rng(seed);
    rofdec::Tensor t(std::move(shape));
    for (double& v : t.values) v = scale * rng.normal();
    return t;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-30});
        m = std::max(m, std::abs(a[i] - b[i]) / scale);
    }
    return m;
}

}  // namespace testutil
