#pragma once

#include <cstdint>
#include <vector>

#include "rofdec/ops.hpp"
#include "rofdec/tape.hpp"
#include "rofdec/tensor.hpp"

namespace rofdec {

// Tensor whose elements are exactly -1 or +1.
struct SignTensor {
    std::vector<int> shape;
    std::vector<std::int8_t> signs;

    std::size_t numel() const { return signs.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
};

// Row-packed bit matrix: one bit per element along the innermost axis,
// bit set <=> sign is +1. Padding bits past row_bits are kept zero.
struct PackedBits {
    int rows = 0;
    int row_bits = 0;
    int words_per_row = 0;
    std::vector<std::uint64_t> words;

    const std::uint64_t* row(int r) const {
        return words.data() + static_cast<std::size_t>(r) * words_per_row;
    }
};

// Sign of the most significant bit position: +1 for x >= 0, -1 for x < 0.
// NaN has no usable sign and is rejected.
int msb(double x);

SignTensor binarize(const Tensor& t);
Tensor sign_to_tensor(const SignTensor& s);

// Direct +/-1 convolution; padded positions contribute +1 (a padded zero
// binarizes to +1). Output elements are exact integers stored as doubles.
Tensor binary_conv1d(const SignTensor& input, const SignTensor& kernels, int padding, int stride);

// Packs a 2-d view [rows, row_bits]; for kernels the innermost axis is the
// flattened (c_in, f) reduction axis.
PackedBits pack(const SignTensor& s);
SignTensor unpack(const PackedBits& p);

// +/-1 dot product of two packed rows of n elements: 2*popcount(xnor) - n.
std::int64_t xnor_popcount_dot(const std::uint64_t* a, const std::uint64_t* b, int words, int n);
std::int64_t xnor_popcount_dot(const PackedBits& a, int row_a, const PackedBits& b, int row_b);

// XNOR/popcount convolution over a packed kernel bank; exactly equal to
// binary_conv1d on the same operands.
Tensor packed_binary_conv1d(const SignTensor& input, const PackedBits& kernels, int n_out, int f,
                            int padding, int stride);

// Sign-bit matmul: input [B, D] x weights [D, K] -> integer logits [B, K].
Tensor binary_dense(const SignTensor& input, const SignTensor& weights);

// Straight-through estimator: gradient passes where |latent| <= clip.
Tensor ste_backward(const Tensor& upstream, const Tensor& latent, double clip = 1.0);

// --- training-path ops (latent real weights, STE backward) ---
//
// In surrogate mode sign() is replaced by clamp to [-1, 1], making the STE
// backward the exact derivative of the forward; finite-difference checks run
// in this mode. Padded positions contribute binfn(0): +1 in sign mode.

Var binary_conv1d_forward(Tape* tape, const Var& input, ConvParams& latent, bool surrogate = false,
                          double clip = 1.0, ForwardStats* stats = nullptr);

// Applies a fixed 1/fan_in scale so the integer logits feed softmax in a
// sane range; argmax is unaffected.
Var binary_dense_forward(Tape* tape, const Var& input, Tensor& latent_weights, bool surrogate = false,
                         double clip = 1.0, ForwardStats* stats = nullptr);

}  // namespace rofdec
