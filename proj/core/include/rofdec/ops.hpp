#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "rofdec/tape.hpp"
#include "rofdec/tensor.hpp"

namespace rofdec {

// Kernel bank of one convolutional layer: kernels [n_out, c_in, f],
// bias [n_out] (bias may be empty for bias-free layers).
struct ConvParams {
    Tensor kernels;
    Tensor bias;
    int padding = 0;
    int stride = 1;

    int n_out() const { return kernels.dim(0); }
    int c_in() const { return kernels.dim(1); }
    int f() const { return kernels.dim(2); }
    bool has_bias() const { return bias.numel() > 0; }
};

enum class BnMode { Train, Infer };

struct BatchNormState {
    Tensor gamma;  // [c]
    Tensor beta;   // [c]
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.9;
    BnMode mode = BnMode::Train;
};

BatchNormState make_batchnorm(int channels, double epsilon = 1e-5, double momentum = 0.9);

// Records every non-smooth decision taken during a forward pass (Leaky-ReLU
// branch, pool argmax, STE/clamp region) as one fingerprint, plus the
// smallest distance of any value to its nearest kink. A finite-difference
// probe whose +-h evaluations change the fingerprint crossed a kink and is
// discarded.
struct ForwardStats {
    double min_kink_margin = std::numeric_limits<double>::infinity();
    std::uint64_t gate_hash = 0xcbf29ce484222325ull;

    void note(double margin) {
        if (margin < min_kink_margin) min_kink_margin = margin;
    }
    void gate(std::uint64_t code) {
        gate_hash = (gate_hash ^ code) * 0x100000001b3ull;
    }
};

// --- forward operations; pass tape = nullptr for inference-style evaluation ---

// input [B, c_in, L] -> [B, n_out, L_out], zero padding,
// L_out = (L + 2*padding - f) / stride + 1.
Var conv1d_forward(Tape* tape, const Var& input, ConvParams& params);

// input [B, d_in] x weights [d_in, d_out] + bias [d_out] -> [B, d_out]
Var dense_forward(Tape* tape, const Var& input, Tensor& weights, Tensor& bias);

Var leaky_relu_forward(Tape* tape, const Var& input, double slope = 0.2, ForwardStats* stats = nullptr);

// Train mode normalizes with batch statistics over (B, L) per channel and,
// when update_running is set, folds them into the running estimates.
// Infer mode uses the running estimates only.
Var batchnorm_forward(Tape* tape, const Var& input, BatchNormState& state, bool update_running = true);

// Ties break toward the lowest index. argmax_out, when given, receives the
// flat input index backing each output element.
Var maxpool1d_forward(Tape* tape, const Var& input, int window = 2, int stride = 2,
                      std::vector<int>* argmax_out = nullptr, ForwardStats* stats = nullptr);

// [B, C, L] -> [B, C*L], channel-major
Var flatten_forward(Tape* tape, const Var& input);

// Optional per-element weights (same numel); loss-style scalar reduction.
Var reduce_sum(Tape* tape, const Var& input, const Tensor* weights = nullptr);

struct LossResult {
    Var loss;             // scalar
    Tensor probabilities; // [B, K]
};

// Mean over the batch of per-row cross-entropy, computed in log space with
// max-subtraction. Rows of onehot_labels must be exact one-hot vectors.
LossResult softmax_cross_entropy(Tape* tape, const Var& logits, const Tensor& onehot_labels);

namespace testing {
// Fault injection for the gradient-check negative control: when enabled,
// conv1d backward perturbs its first kernel gradient.
void corrupt_conv_backward(bool enable);
}  // namespace testing

}  // namespace rofdec
