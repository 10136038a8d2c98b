#include "rofdec/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <string>

#include "rofdec/errors.hpp"

namespace rofdec {

namespace {

std::atomic<bool> g_corrupt_conv_backward{false};

void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

int conv_out_len(int length, int padding, int f, int stride) {
    return (length + 2 * padding - f) / stride + 1;
}

}  // namespace

namespace testing {
void corrupt_conv_backward(bool enable) { g_corrupt_conv_backward.store(enable); }
}  // namespace testing

BatchNormState make_batchnorm(int channels, double epsilon, double momentum) {
    BatchNormState s;
    s.gamma = Tensor({channels}, std::vector<double>(static_cast<std::size_t>(channels), 1.0));
    s.beta = Tensor({channels});
    s.running_mean.assign(static_cast<std::size_t>(channels), 0.0);
    s.running_var.assign(static_cast<std::size_t>(channels), 1.0);
    s.epsilon = epsilon;
    s.momentum = momentum;
    return s;
}

// ---------------------------------------------------------------- conv1d

namespace {

struct Conv1dNode final : TapeNode {
    Var x, y;
    ConvParams* p;

    void backward() override {
        if (!y->has_grad()) return;
        const int batch = x->dim(0), c_in = x->dim(1), len = x->dim(2);
        const int n_out = p->n_out(), f = p->f();
        const int pad = p->padding, stride = p->stride;
        const int l_out = y->dim(2);
        const double* g = y->grad.data();
        const double* in = x->values.data();
        const double* k = p->kernels.values.data();

        x->ensure_grad();
        p->kernels.ensure_grad();
        if (p->has_bias()) p->bias.ensure_grad();
        double* dx = x->grad.data();
        double* dk = p->kernels.grad.data();

        for (int b = 0; b < batch; ++b) {
            for (int n = 0; n < n_out; ++n) {
                const double* grow = g + (static_cast<std::size_t>(b) * n_out + n) * l_out;
                if (p->has_bias()) {
                    double s = 0.0;
                    for (int t = 0; t < l_out; ++t) s += grow[t];
                    p->bias.grad[static_cast<std::size_t>(n)] += s;
                }
                for (int c = 0; c < c_in; ++c) {
                    const double* xrow = in + (static_cast<std::size_t>(b) * c_in + c) * len;
                    double* dxrow = dx + (static_cast<std::size_t>(b) * c_in + c) * len;
                    const double* krow = k + (static_cast<std::size_t>(n) * c_in + c) * f;
                    double* dkrow = dk + (static_cast<std::size_t>(n) * c_in + c) * f;
                    // per-j passes keep the t loop contiguous on both sides
                    for (int j = 0; j < f; ++j) {
                        const int off = j - pad;
                        const int t_lo = std::max(0, (-off + stride - 1) / stride);
                        const int t_hi = std::min(l_out - 1, (len - 1 - off) / stride);
                        const double kv = krow[j];
                        double dkv = 0.0;
                        if (stride == 1) {
                            const double* xs = xrow + off;
                            double* dxs = dxrow + off;
                            for (int t = t_lo; t <= t_hi; ++t) {
                                dxs[t] += grow[t] * kv;
                                dkv += grow[t] * xs[t];
                            }
                        } else {
                            for (int t = t_lo; t <= t_hi; ++t) {
                                const int i = t * stride + off;
                                dxrow[i] += grow[t] * kv;
                                dkv += grow[t] * xrow[i];
                            }
                        }
                        dkrow[j] += dkv;
                    }
                }
            }
        }
        if (g_corrupt_conv_backward.load()) p->kernels.grad[0] *= 1.01;
    }
};

}  // namespace

Var conv1d_forward(Tape* tape, const Var& input, ConvParams& params) {
    require(input->shape.size() == 3, "conv1d input must be [B, c_in, L], got " + shape_str(input->shape));
    require(params.kernels.shape.size() == 3,
            "conv1d kernels must be [n_out, c_in, f], got " + shape_str(params.kernels.shape));
    const int batch = input->dim(0), c_in = input->dim(1), len = input->dim(2);
    if (c_in != params.c_in())
        throw DimensionError("conv1d channel axis mismatch: input c_in=" + std::to_string(c_in) +
                             " vs kernel c_in=" + std::to_string(params.c_in()));
    if (params.has_bias() && params.bias.dim(0) != params.n_out())
        throw DimensionError("conv1d bias axis mismatch: bias=" + std::to_string(params.bias.dim(0)) +
                             " vs n_out=" + std::to_string(params.n_out()));
    const int f = params.f(), pad = params.padding, stride = params.stride;
    if (stride < 1) throw DimensionError("conv1d stride must be >= 1");
    if (len + 2 * pad < f)
        throw DimensionError("conv1d length axis too short: L=" + std::to_string(len) +
                             " pad=" + std::to_string(pad) + " < f=" + std::to_string(f));
    const int n_out = params.n_out();
    const int l_out = conv_out_len(len, pad, f, stride);

    Tensor out({batch, n_out, l_out});
    const double* in = input->values.data();
    const double* k = params.kernels.values.data();
    double* o = out.values.data();
    for (int b = 0; b < batch; ++b) {
        for (int n = 0; n < n_out; ++n) {
            double* orow = o + (static_cast<std::size_t>(b) * n_out + n) * l_out;
            const double bias = params.has_bias() ? params.bias.values[static_cast<std::size_t>(n)] : 0.0;
            for (int t = 0; t < l_out; ++t) orow[t] = bias;
            for (int c = 0; c < c_in; ++c) {
                const double* xrow = in + (static_cast<std::size_t>(b) * c_in + c) * len;
                const double* krow = k + (static_cast<std::size_t>(n) * c_in + c) * f;
                for (int j = 0; j < f; ++j) {
                    const int off = j - pad;
                    const int t_lo = std::max(0, (-off + stride - 1) / stride);
                    const int t_hi = std::min(l_out - 1, (len - 1 - off) / stride);
                    const double kv = krow[j];
                    if (stride == 1) {
                        const double* xs = xrow + off;
                        for (int t = t_lo; t <= t_hi; ++t) orow[t] += kv * xs[t];
                    } else {
                        for (int t = t_lo; t <= t_hi; ++t) orow[t] += kv * xrow[t * stride + off];
                    }
                }
            }
        }
    }

    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<Conv1dNode>();
        node->x = input;
        node->y = y;
        node->p = &params;
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- dense

namespace {

struct DenseNode final : TapeNode {
    Var x, y;
    Tensor* w;
    Tensor* b;

    void backward() override {
        if (!y->has_grad()) return;
        const int batch = x->dim(0), d_in = x->dim(1), d_out = y->dim(1);
        const double* g = y->grad.data();
        const double* in = x->values.data();
        const double* wv = w->values.data();

        x->ensure_grad();
        w->ensure_grad();
        if (b) b->ensure_grad();
        for (int r = 0; r < batch; ++r) {
            const double* grow = g + static_cast<std::size_t>(r) * d_out;
            const double* xrow = in + static_cast<std::size_t>(r) * d_in;
            double* dxrow = x->grad.data() + static_cast<std::size_t>(r) * d_in;
            for (int i = 0; i < d_in; ++i) {
                const double* wrow = wv + static_cast<std::size_t>(i) * d_out;
                double* dwrow = w->grad.data() + static_cast<std::size_t>(i) * d_out;
                const double xv = xrow[i];
                double acc = 0.0;
                for (int j = 0; j < d_out; ++j) {
                    acc += grow[j] * wrow[j];
                    dwrow[j] += grow[j] * xv;
                }
                dxrow[i] += acc;
            }
            if (b)
                for (int j = 0; j < d_out; ++j) b->grad[static_cast<std::size_t>(j)] += grow[j];
        }
    }
};

}  // namespace

Var dense_forward(Tape* tape, const Var& input, Tensor& weights, Tensor& bias) {
    require(input->shape.size() == 2, "dense input must be [B, d_in], got " + shape_str(input->shape));
    require(weights.shape.size() == 2, "dense weights must be [d_in, d_out], got " + shape_str(weights.shape));
    const int batch = input->dim(0), d_in = input->dim(1);
    if (weights.dim(0) != d_in)
        throw DimensionError("dense inner axis mismatch: input d_in=" + std::to_string(d_in) +
                             " vs weights d_in=" + std::to_string(weights.dim(0)));
    const int d_out = weights.dim(1);
    const bool has_bias = bias.numel() > 0;
    if (has_bias && bias.dim(0) != d_out)
        throw DimensionError("dense bias axis mismatch: bias=" + std::to_string(bias.dim(0)) +
                             " vs d_out=" + std::to_string(d_out));

    Tensor out({batch, d_out});
    const double* in = input->values.data();
    const double* wv = weights.values.data();
    double* o = out.values.data();
    for (int r = 0; r < batch; ++r) {
        const double* xrow = in + static_cast<std::size_t>(r) * d_in;
        double* orow = o + static_cast<std::size_t>(r) * d_out;
        if (has_bias)
            for (int j = 0; j < d_out; ++j) orow[j] = bias.values[static_cast<std::size_t>(j)];
        for (int i = 0; i < d_in; ++i) {
            const double xv = xrow[i];
            const double* wrow = wv + static_cast<std::size_t>(i) * d_out;
            for (int j = 0; j < d_out; ++j) orow[j] += xv * wrow[j];
        }
    }

    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<DenseNode>();
        node->x = input;
        node->y = y;
        node->w = &weights;
        node->b = has_bias ? &bias : nullptr;
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- leaky relu

namespace {

struct LeakyReluNode final : TapeNode {
    Var x, y;
    double slope;

    void backward() override {
        if (!y->has_grad()) return;
        x->ensure_grad();
        const double* g = y->grad.data();
        const double* in = x->values.data();
        double* dx = x->grad.data();
        const std::size_t n = x->numel();
        for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * (in[i] >= 0.0 ? 1.0 : slope);
    }
};

}  // namespace

Var leaky_relu_forward(Tape* tape, const Var& input, double slope, ForwardStats* stats) {
    Tensor out(input->shape);
    const double* in = input->values.data();
    double* o = out.values.data();
    const std::size_t n = input->numel();
    for (std::size_t i = 0; i < n; ++i) o[i] = in[i] >= 0.0 ? in[i] : slope * in[i];
    if (stats)
        for (std::size_t i = 0; i < n; ++i) {
            stats->note(std::abs(in[i]));
            stats->gate(in[i] >= 0.0 ? 1u : 0u);
        }

    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<LeakyReluNode>();
        node->x = input;
        node->y = y;
        node->slope = slope;
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- batch norm

namespace {

struct BatchNormNode final : TapeNode {
    Var x, y;
    BatchNormState* s;
    BnMode mode;
    // saved per-channel statistics from forward
    std::vector<double> mean, istd;
    std::vector<double> xhat;  // same layout as input

    void backward() override {
        if (!y->has_grad()) return;
        const int batch = x->dim(0), ch = x->dim(1), len = x->dim(2);
        const std::size_t m = static_cast<std::size_t>(batch) * static_cast<std::size_t>(len);
        const double* g = y->grad.data();
        x->ensure_grad();
        s->gamma.ensure_grad();
        s->beta.ensure_grad();
        for (int c = 0; c < ch; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (int b = 0; b < batch; ++b) {
                const std::size_t base = (static_cast<std::size_t>(b) * ch + c) * len;
                for (int l = 0; l < len; ++l) {
                    sum_g += g[base + l];
                    sum_gx += g[base + l] * xhat[base + l];
                }
            }
            s->beta.grad[static_cast<std::size_t>(c)] += sum_g;
            s->gamma.grad[static_cast<std::size_t>(c)] += sum_gx;
            const double gamma = s->gamma.values[static_cast<std::size_t>(c)];
            if (mode == BnMode::Train) {
                const double k = gamma * istd[static_cast<std::size_t>(c)] / static_cast<double>(m);
                for (int b = 0; b < batch; ++b) {
                    const std::size_t base = (static_cast<std::size_t>(b) * ch + c) * len;
                    for (int l = 0; l < len; ++l)
                        x->grad[base + l] +=
                            k * (static_cast<double>(m) * g[base + l] - sum_g - xhat[base + l] * sum_gx);
                }
            } else {
                const double k = gamma * istd[static_cast<std::size_t>(c)];
                for (int b = 0; b < batch; ++b) {
                    const std::size_t base = (static_cast<std::size_t>(b) * ch + c) * len;
                    for (int l = 0; l < len; ++l) x->grad[base + l] += k * g[base + l];
                }
            }
        }
    }
};

}  // namespace

Var batchnorm_forward(Tape* tape, const Var& input, BatchNormState& state, bool update_running) {
    require(input->shape.size() == 3, "batchnorm input must be [B, C, L], got " + shape_str(input->shape));
    const int batch = input->dim(0), ch = input->dim(1), len = input->dim(2);
    if (ch != state.gamma.dim(0))
        throw DimensionError("batchnorm channel axis mismatch: input C=" + std::to_string(ch) +
                             " vs state C=" + std::to_string(state.gamma.dim(0)));
    const std::size_t m = static_cast<std::size_t>(batch) * static_cast<std::size_t>(len);
    if (state.mode == BnMode::Train && m < 2)
        throw DataError("batchnorm train mode needs at least 2 samples per channel, got " + std::to_string(m));

    std::vector<double> mean(static_cast<std::size_t>(ch), 0.0);
    std::vector<double> istd(static_cast<std::size_t>(ch), 0.0);
    const double* in = input->values.data();
    if (state.mode == BnMode::Train) {
        for (int c = 0; c < ch; ++c) {
            double s = 0.0;
            for (int b = 0; b < batch; ++b) {
                const double* row = in + (static_cast<std::size_t>(b) * ch + c) * len;
                for (int l = 0; l < len; ++l) s += row[l];
            }
            const double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (int b = 0; b < batch; ++b) {
                const double* row = in + (static_cast<std::size_t>(b) * ch + c) * len;
                for (int l = 0; l < len; ++l) {
                    const double d = row[l] - mu;
                    v += d * d;
                }
            }
            const double var = v / static_cast<double>(m);  // population variance
            mean[static_cast<std::size_t>(c)] = mu;
            istd[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + state.epsilon);
            if (update_running) {
                state.running_mean[static_cast<std::size_t>(c)] =
                    state.momentum * state.running_mean[static_cast<std::size_t>(c)] + (1.0 - state.momentum) * mu;
                state.running_var[static_cast<std::size_t>(c)] =
                    state.momentum * state.running_var[static_cast<std::size_t>(c)] + (1.0 - state.momentum) * var;
            }
        }
    } else {
        for (int c = 0; c < ch; ++c) {
            mean[static_cast<std::size_t>(c)] = state.running_mean[static_cast<std::size_t>(c)];
            istd[static_cast<std::size_t>(c)] =
                1.0 / std::sqrt(state.running_var[static_cast<std::size_t>(c)] + state.epsilon);
        }
    }

    Tensor out(input->shape);
    std::vector<double> xhat(input->numel());
    for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < ch; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * ch + c) * len;
            const double mu = mean[static_cast<std::size_t>(c)];
            const double is = istd[static_cast<std::size_t>(c)];
            const double gamma = state.gamma.values[static_cast<std::size_t>(c)];
            const double beta = state.beta.values[static_cast<std::size_t>(c)];
            for (int l = 0; l < len; ++l) {
                const double xh = (in[base + l] - mu) * is;
                xhat[base + l] = xh;
                out.values[base + l] = gamma * xh + beta;
            }
        }
    }

    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<BatchNormNode>();
        node->x = input;
        node->y = y;
        node->s = &state;
        node->mode = state.mode;
        node->mean = std::move(mean);
        node->istd = std::move(istd);
        node->xhat = std::move(xhat);
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- max pool

namespace {

struct MaxPool1dNode final : TapeNode {
    Var x, y;
    std::vector<int> argmax;

    void backward() override {
        if (!y->has_grad()) return;
        x->ensure_grad();
        const double* g = y->grad.data();
        for (std::size_t i = 0; i < argmax.size(); ++i)
            x->grad[static_cast<std::size_t>(argmax[i])] += g[i];
    }
};

}  // namespace

Var maxpool1d_forward(Tape* tape, const Var& input, int window, int stride,
                      std::vector<int>* argmax_out, ForwardStats* stats) {
    require(input->shape.size() == 3, "maxpool1d input must be [B, C, L], got " + shape_str(input->shape));
    const int batch = input->dim(0), ch = input->dim(1), len = input->dim(2);
    if (window > len)
        throw DimensionError("maxpool1d window " + std::to_string(window) +
                             " exceeds length axis L=" + std::to_string(len));
    const int l_out = (len - window) / stride + 1;

    Tensor out({batch, ch, l_out});
    std::vector<int> argmax(out.numel());
    const double* in = input->values.data();
    for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < ch; ++c) {
            const std::size_t ibase = (static_cast<std::size_t>(b) * ch + c) * len;
            const std::size_t obase = (static_cast<std::size_t>(b) * ch + c) * l_out;
            for (int t = 0; t < l_out; ++t) {
                const int start = t * stride;
                int best = start;
                double bestv = in[ibase + start];
                double second = -std::numeric_limits<double>::infinity();
                for (int j = 1; j < window; ++j) {
                    const double v = in[ibase + start + j];
                    if (v > bestv) {
                        second = bestv;
                        bestv = v;
                        best = start + j;
                    } else if (v > second) {
                        second = v;
                    }
                }
                out.values[obase + t] = bestv;
                argmax[obase + t] = static_cast<int>(ibase) + best;
                if (stats && window > 1) {
                    stats->note(bestv - second);
                    stats->gate(static_cast<std::uint64_t>(best - start));
                }
            }
        }
    }

    if (argmax_out) *argmax_out = argmax;
    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<MaxPool1dNode>();
        node->x = input;
        node->y = y;
        node->argmax = std::move(argmax);
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- flatten

namespace {

struct FlattenNode final : TapeNode {
    Var x, y;

    void backward() override {
        if (!y->has_grad()) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += y->grad[i];
    }
};

}  // namespace

Var flatten_forward(Tape* tape, const Var& input) {
    require(input->shape.size() == 3, "flatten input must be [B, C, L], got " + shape_str(input->shape));
    Tensor out({input->dim(0), input->dim(1) * input->dim(2)}, input->values);
    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<FlattenNode>();
        node->x = input;
        node->y = y;
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- reduce sum

namespace {

struct ReduceSumNode final : TapeNode {
    Var x, y;
    std::vector<double> weights;  // empty = all ones

    void backward() override {
        if (!y->has_grad()) return;
        x->ensure_grad();
        const double g = y->grad[0];
        if (weights.empty()) {
            for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += g;
        } else {
            for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += g * weights[i];
        }
    }
};

}  // namespace

Var reduce_sum(Tape* tape, const Var& input, const Tensor* weights) {
    if (weights && weights->numel() != input->numel())
        throw DimensionError("reduce_sum weights numel " + std::to_string(weights->numel()) +
                             " does not match input numel " + std::to_string(input->numel()));
    double s = 0.0;
    for (std::size_t i = 0; i < input->numel(); ++i)
        s += input->values[i] * (weights ? weights->values[i] : 1.0);
    Var y = make_var(Tensor({1}, {s}));
    if (tape) {
        auto node = std::make_unique<ReduceSumNode>();
        node->x = input;
        node->y = y;
        if (weights) node->weights = weights->values;
        tape->record(std::move(node));
    }
    return y;
}

// ---------------------------------------------------------------- softmax xent

namespace {

struct SoftmaxXentNode final : TapeNode {
    Var logits, loss;
    std::vector<double> probs;
    std::vector<double> labels;

    void backward() override {
        if (!loss->has_grad()) return;
        logits->ensure_grad();
        const double g = loss->grad[0];
        const int batch = logits->dim(0);
        const double inv_b = 1.0 / static_cast<double>(batch);
        for (std::size_t i = 0; i < probs.size(); ++i)
            logits->grad[i] += g * inv_b * (probs[i] - labels[i]);
    }
};

}  // namespace

LossResult softmax_cross_entropy(Tape* tape, const Var& logits, const Tensor& onehot_labels) {
    require(logits->shape.size() == 2, "softmax_cross_entropy logits must be [B, K], got " + shape_str(logits->shape));
    if (onehot_labels.shape != logits->shape)
        throw DimensionError("label shape " + shape_str(onehot_labels.shape) + " does not match logits " +
                             shape_str(logits->shape));
    const int batch = logits->dim(0), k = logits->dim(1);
    if (k < 2) throw DimensionError("softmax_cross_entropy needs K >= 2 categories");

    Tensor probs({batch, k});
    double total = 0.0;
    for (int b = 0; b < batch; ++b) {
        const double* row = logits->values.data() + static_cast<std::size_t>(b) * k;
        const double* lab = onehot_labels.values.data() + static_cast<std::size_t>(b) * k;

        int hot = -1;
        for (int j = 0; j < k; ++j) {
            if (lab[j] == 1.0) {
                if (hot >= 0) throw DataError("label row " + std::to_string(b) + " has more than one hot entry");
                hot = j;
            } else if (lab[j] != 0.0) {
                throw DataError("label row " + std::to_string(b) + " is not one-hot (entry " +
                                std::to_string(lab[j]) + ")");
            }
        }
        if (hot < 0) throw DataError("label row " + std::to_string(b) + " has no hot entry");

        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
        for (int j = 0; j < k; ++j)
            probs.values[static_cast<std::size_t>(b) * k + j] = std::exp(row[j] - mx) / denom;
        // -log p[hot], in log space so extreme logits stay finite
        total += std::log(denom) - (row[hot] - mx);
    }
    const double mean_loss = total / static_cast<double>(batch);

    Var loss = make_var(Tensor({1}, {mean_loss}));
    if (tape) {
        auto node = std::make_unique<SoftmaxXentNode>();
        node->logits = logits;
        node->loss = loss;
        node->probs = probs.values;
        node->labels = onehot_labels.values;
        tape->record(std::move(node));
    }
    return {loss, std::move(probs)};
}

}  // namespace rofdec
