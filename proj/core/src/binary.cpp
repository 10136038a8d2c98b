#include "rofdec/binary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <string>

#include "rofdec/errors.hpp"

namespace rofdec {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}

// surrogate mode swaps sign() for a clamp so the STE gate is its exact
// derivative; clip is the shared bound
inline double binfn(double v, bool surrogate, double clip = 1.0) {
    if (surrogate) return std::clamp(v, -clip, clip);
    return v >= 0.0 ? 1.0 : -1.0;
}

}  // namespace

int msb(double x) {
    if (std::isnan(x)) throw NumericError("msb of NaN is undefined");
    return x >= 0.0 ? 1 : -1;
}

SignTensor binarize(const Tensor& t) {
    SignTensor s;
    s.shape = t.shape;
    s.signs.resize(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i)
        s.signs[i] = static_cast<std::int8_t>(msb(t.values[i]));
    return s;
}

Tensor sign_to_tensor(const SignTensor& s) {
    Tensor t(s.shape);
    for (std::size_t i = 0; i < s.numel(); ++i) t.values[i] = static_cast<double>(s.signs[i]);
    return t;
}

Tensor binary_conv1d(const SignTensor& input, const SignTensor& kernels, int padding, int stride) {
    require(input.shape.size() == 3, "binary_conv1d input must be [B, c_in, L]");
    require(kernels.shape.size() == 3, "binary_conv1d kernels must be [n_out, c_in, f]");
    const int batch = input.dim(0), c_in = input.dim(1), len = input.dim(2);
    if (c_in != kernels.dim(1))
        throw DimensionError("binary_conv1d channel axis mismatch: input c_in=" + std::to_string(c_in) +
                             " vs kernel c_in=" + std::to_string(kernels.dim(1)));
    const int n_out = kernels.dim(0), f = kernels.dim(2);
    if (stride < 1) throw DimensionError("binary_conv1d stride must be >= 1");
    if (len + 2 * padding < f) throw DimensionError("binary_conv1d length axis too short for kernel");
    const int l_out = (len + 2 * padding - f) / stride + 1;

    Tensor out({batch, n_out, l_out});
    for (int b = 0; b < batch; ++b) {
        for (int n = 0; n < n_out; ++n) {
            double* orow = out.values.data() + (static_cast<std::size_t>(b) * n_out + n) * l_out;
            for (int t = 0; t < l_out; ++t) {
                const int start = t * stride - padding;
                int acc = 0;
                for (int c = 0; c < c_in; ++c) {
                    const std::int8_t* xrow = input.signs.data() + (static_cast<std::size_t>(b) * c_in + c) * len;
                    const std::int8_t* krow =
                        kernels.signs.data() + (static_cast<std::size_t>(n) * c_in + c) * f;
                    for (int j = 0; j < f; ++j) {
                        const int i = start + j;
                        const int xv = (i < 0 || i >= len) ? 1 : xrow[i];  // +1 padding
                        acc += xv * krow[j];
                    }
                }
                orow[t] = static_cast<double>(acc);
            }
        }
    }
    return out;
}

PackedBits pack(const SignTensor& s) {
    require(!s.shape.empty(), "pack needs at least one axis");
    const int row_bits = s.shape.back();
    int rows = 1;
    for (std::size_t i = 0; i + 1 < s.shape.size(); ++i) rows *= s.shape[i];

    PackedBits p;
    p.rows = rows;
    p.row_bits = row_bits;
    p.words_per_row = (row_bits + 63) / 64;
    p.words.assign(static_cast<std::size_t>(rows) * p.words_per_row, 0);
    for (int r = 0; r < rows; ++r) {
        std::uint64_t* w = p.words.data() + static_cast<std::size_t>(r) * p.words_per_row;
        const std::int8_t* src = s.signs.data() + static_cast<std::size_t>(r) * row_bits;
        for (int i = 0; i < row_bits; ++i)
            if (src[i] > 0) w[i >> 6] |= (1ull << (i & 63));
    }
    return p;
}

SignTensor unpack(const PackedBits& p) {
    SignTensor s;
    s.shape = {p.rows, p.row_bits};
    s.signs.resize(static_cast<std::size_t>(p.rows) * p.row_bits);
    for (int r = 0; r < p.rows; ++r) {
        const std::uint64_t* w = p.row(r);
        std::int8_t* dst = s.signs.data() + static_cast<std::size_t>(r) * p.row_bits;
        for (int i = 0; i < p.row_bits; ++i)
            dst[i] = (w[i >> 6] >> (i & 63)) & 1ull ? 1 : -1;
    }
    return s;
}

std::int64_t xnor_popcount_dot(const std::uint64_t* a, const std::uint64_t* b, int words, int n) {
    std::int64_t agree = 0;
    for (int w = 0; w < words; ++w) {
        std::uint64_t x = ~(a[w] ^ b[w]);
        const int bits_here = std::min(64, n - w * 64);
        if (bits_here < 64) x &= (bits_here == 0) ? 0ull : (~0ull >> (64 - bits_here));
        agree += std::popcount(x);
    }
    return 2 * agree - n;
}

std::int64_t xnor_popcount_dot(const PackedBits& a, int row_a, const PackedBits& b, int row_b) {
    if (a.row_bits != b.row_bits)
        throw DimensionError("xnor_popcount_dot element count mismatch: " + std::to_string(a.row_bits) +
                             " vs " + std::to_string(b.row_bits));
    return xnor_popcount_dot(a.row(row_a), b.row(row_b), a.words_per_row, a.row_bits);
}

Tensor packed_binary_conv1d(const SignTensor& input, const PackedBits& kernels, int n_out, int f,
                            int padding, int stride) {
    require(input.shape.size() == 3, "packed_binary_conv1d input must be [B, c_in, L]");
    const int batch = input.dim(0), c_in = input.dim(1), len = input.dim(2);
    const int n = c_in * f;
    if (kernels.row_bits != n || kernels.rows != n_out)
        throw DimensionError("packed kernel bank does not match n_out=" + std::to_string(n_out) +
                             ", c_in*f=" + std::to_string(n));
    if (len + 2 * padding < f) throw DimensionError("packed_binary_conv1d length axis too short for kernel");
    const int l_out = (len + 2 * padding - f) / stride + 1;
    const int words = kernels.words_per_row;

    Tensor out({batch, n_out, l_out});
    std::vector<std::uint64_t> patch(static_cast<std::size_t>(words));
    for (int b = 0; b < batch; ++b) {
        for (int t = 0; t < l_out; ++t) {
            std::fill(patch.begin(), patch.end(), 0ull);
            const int start = t * stride - padding;
            int bit = 0;
            for (int c = 0; c < c_in; ++c) {
                const std::int8_t* xrow = input.signs.data() + (static_cast<std::size_t>(b) * c_in + c) * len;
                for (int j = 0; j < f; ++j, ++bit) {
                    const int i = start + j;
                    const bool plus = (i < 0 || i >= len) ? true : xrow[i] > 0;  // +1 padding
                    if (plus) patch[static_cast<std::size_t>(bit >> 6)] |= (1ull << (bit & 63));
                }
            }
            for (int k = 0; k < n_out; ++k) {
                const std::int64_t dot = xnor_popcount_dot(patch.data(), kernels.row(k), words, n);
                out.values[(static_cast<std::size_t>(b) * n_out + k) * l_out + t] = static_cast<double>(dot);
            }
        }
    }
    return out;
}

Tensor binary_dense(const SignTensor& input, const SignTensor& weights) {
    require(input.shape.size() == 2, "binary_dense input must be [B, D]");
    require(weights.shape.size() == 2, "binary_dense weights must be [D, K]");
    const int batch = input.dim(0), d = input.dim(1);
    if (weights.dim(0) != d)
        throw DimensionError("binary_dense inner axis mismatch: input D=" + std::to_string(d) +
                             " vs weights D=" + std::to_string(weights.dim(0)));
    const int k = weights.dim(1);

    Tensor out({batch, k});
    for (int b = 0; b < batch; ++b) {
        const std::int8_t* xrow = input.signs.data() + static_cast<std::size_t>(b) * d;
        double* orow = out.values.data() + static_cast<std::size_t>(b) * k;
        for (int j = 0; j < k; ++j) {
            int acc = 0;
            for (int i = 0; i < d; ++i) acc += xrow[i] * weights.signs[static_cast<std::size_t>(i) * k + j];
            orow[j] = static_cast<double>(acc);
        }
    }
    return out;
}

Tensor ste_backward(const Tensor& upstream, const Tensor& latent, double clip) {
    if (upstream.shape != latent.shape)
        throw DimensionError("ste_backward shape mismatch: " + shape_str(upstream.shape) + " vs " +
                             shape_str(latent.shape));
    Tensor out(upstream.shape);
    for (std::size_t i = 0; i < upstream.numel(); ++i)
        out.values[i] = std::abs(latent.values[i]) <= clip ? upstream.values[i] : 0.0;
    return out;
}

// ------------------------------------------------- training-path tape ops

namespace {

struct BinaryConv1dNode final : TapeNode {
    Var x, y;
    ConvParams* latent;
    std::vector<double> xb_padded;  // [B, c_in, L + 2*pad]
    std::vector<double> wb;         // binfn(latent kernels)
    int batch, c_in, len, pad, stride, n_out, f, l_out;
    double clip;

    // Contiguous-axpy formulation: per (b, t) the gradient column over n is
    // broadcast against weight planes transposed to put n or c innermost.
    void backward_fast(const double* g, std::vector<double>& dxb, std::vector<double>& dwb) const {
        const int lp = len + 2 * pad;
        const std::size_t nc = static_cast<std::size_t>(n_out) * c_in;
        // w_t[j][n][c] <- wb[n][c][j]
        std::vector<double> w_t(static_cast<std::size_t>(f) * nc);
        for (int n = 0; n < n_out; ++n)
            for (int c = 0; c < c_in; ++c)
                for (int j = 0; j < f; ++j)
                    w_t[(static_cast<std::size_t>(j) * n_out + n) * c_in + c] =
                        wb[(static_cast<std::size_t>(n) * c_in + c) * f + j];

        std::vector<double> gcol(static_cast<std::size_t>(n_out));
        std::vector<double> dxacc(static_cast<std::size_t>(f) * c_in);
        std::vector<double> xpatch(static_cast<std::size_t>(c_in) * f);
        std::vector<double> dw_flat(static_cast<std::size_t>(n_out) * c_in * f, 0.0);

        for (int b = 0; b < batch; ++b) {
            const double* xb_b = xb_padded.data() + static_cast<std::size_t>(b) * c_in * lp;
            double* dxb_b = dxb.data() + static_cast<std::size_t>(b) * c_in * lp;
            const double* g_b = g + static_cast<std::size_t>(b) * n_out * l_out;
            for (int t = 0; t < l_out; ++t) {
                const int start = t * stride;
                for (int n = 0; n < n_out; ++n)
                    gcol[static_cast<std::size_t>(n)] = g_b[static_cast<std::size_t>(n) * l_out + t];
                // xpatch[c*f + j] = xb[b, c, start + j]
                for (int c = 0; c < c_in; ++c)
                    for (int j = 0; j < f; ++j)
                        xpatch[static_cast<std::size_t>(c) * f + j] =
                            xb_b[static_cast<std::size_t>(c) * lp + start + j];

                std::fill(dxacc.begin(), dxacc.end(), 0.0);
                for (int n = 0; n < n_out; ++n) {
                    const double gv = gcol[static_cast<std::size_t>(n)];
                    if (gv == 0.0) continue;
                    // dw[n, :, :] += gv * xpatch  (contiguous over c*f)
                    double* dwrow = dw_flat.data() + static_cast<std::size_t>(n) * c_in * f;
                    for (std::size_t i = 0; i < xpatch.size(); ++i) dwrow[i] += gv * xpatch[i];
                    // dxacc[j, :] += gv * w_t[j, n, :]  (contiguous over c)
                    for (int j = 0; j < f; ++j) {
                        const double* wrow = w_t.data() + (static_cast<std::size_t>(j) * n_out + n) * c_in;
                        double* acc = dxacc.data() + static_cast<std::size_t>(j) * c_in;
                        for (int c = 0; c < c_in; ++c) acc[c] += gv * wrow[c];
                    }
                }
                for (int j = 0; j < f; ++j) {
                    const double* acc = dxacc.data() + static_cast<std::size_t>(j) * c_in;
                    for (int c = 0; c < c_in; ++c)
                        dxb_b[static_cast<std::size_t>(c) * lp + start + j] += acc[c];
                }
            }
        }
        for (std::size_t i = 0; i < dwb.size(); ++i) dwb[i] += dw_flat[i];
    }

    void backward() override {
        if (!y->has_grad()) return;
        const int lp = len + 2 * pad;
        const double* g = y->grad.data();

        std::vector<double> dxb(xb_padded.size(), 0.0);
        std::vector<double> dwb(wb.size(), 0.0);
        backward_fast(g, dxb, dwb);

        // STE gates on both operands
        latent->kernels.ensure_grad();
        for (std::size_t i = 0; i < dwb.size(); ++i)
            if (std::abs(latent->kernels.values[i]) <= clip) latent->kernels.grad[i] += dwb[i];

        x->ensure_grad();
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < c_in; ++c) {
                const std::size_t src = (static_cast<std::size_t>(b) * c_in + c) * lp;
                const std::size_t dst = (static_cast<std::size_t>(b) * c_in + c) * len;
                for (int i = 0; i < len; ++i)
                    if (std::abs(x->values[dst + i]) <= clip) x->grad[dst + i] += dxb[src + pad + i];
            }
        }
    }
};

struct BinaryDenseNode final : TapeNode {
    Var x, y;
    Tensor* latent;
    std::vector<double> xb;  // [B, D]
    std::vector<double> wb;  // [D, K]
    int batch, d, k;
    double scale, clip;

    void backward() override {
        if (!y->has_grad()) return;
        const double* g = y->grad.data();

        std::vector<double> dwb(wb.size(), 0.0);
        std::vector<double> dxb(xb.size(), 0.0);
        for (int b = 0; b < batch; ++b) {
            const double* grow = g + static_cast<std::size_t>(b) * k;
            const double* xrow = xb.data() + static_cast<std::size_t>(b) * d;
            double* dxrow = dxb.data() + static_cast<std::size_t>(b) * d;
            for (int i = 0; i < d; ++i) {
                const double* wrow = wb.data() + static_cast<std::size_t>(i) * k;
                double* dwrow = dwb.data() + static_cast<std::size_t>(i) * k;
                double acc = 0.0;
                for (int j = 0; j < k; ++j) {
                    acc += grow[j] * wrow[j];
                    dwrow[j] += grow[j] * xrow[i];
                }
                dxrow[i] += acc;
            }
        }

        latent->ensure_grad();
        for (std::size_t i = 0; i < dwb.size(); ++i)
            if (std::abs(latent->values[i]) <= clip) latent->grad[i] += scale * dwb[i];

        x->ensure_grad();
        for (std::size_t i = 0; i < dxb.size(); ++i)
            if (std::abs(x->values[i]) <= clip) x->grad[i] += scale * dxb[i];
    }
};

}  // namespace

Var binary_conv1d_forward(Tape* tape, const Var& input, ConvParams& latent, bool surrogate, double clip,
                          ForwardStats* stats) {
    require(input->shape.size() == 3, "binary_conv1d input must be [B, c_in, L]");
    require(latent.kernels.shape.size() == 3, "binary_conv1d latent kernels must be [n_out, c_in, f]");
    if (latent.has_bias()) throw DimensionError("binarized convolution is bias-free");
    const int batch = input->dim(0), c_in = input->dim(1), len = input->dim(2);
    if (c_in != latent.c_in())
        throw DimensionError("binary_conv1d channel axis mismatch: input c_in=" + std::to_string(c_in) +
                             " vs kernel c_in=" + std::to_string(latent.c_in()));
    const int n_out = latent.n_out(), f = latent.f(), pad = latent.padding, stride = latent.stride;
    if (len + 2 * pad < f) throw DimensionError("binary_conv1d length axis too short for kernel");
    const int l_out = (len + 2 * pad - f) / stride + 1;
    const int lp = len + 2 * pad;

    std::vector<double> xb(static_cast<std::size_t>(batch) * c_in * lp, binfn(0.0, surrogate, clip));
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < c_in; ++c) {
            const double* src = input->values.data() + (static_cast<std::size_t>(b) * c_in + c) * len;
            double* dst = xb.data() + (static_cast<std::size_t>(b) * c_in + c) * lp + pad;
            for (int i = 0; i < len; ++i) dst[i] = binfn(src[i], surrogate, clip);
        }
    std::vector<double> wb(latent.kernels.numel());
    for (std::size_t i = 0; i < wb.size(); ++i) wb[i] = binfn(latent.kernels.values[i], surrogate, clip);

    if (stats) {
        for (std::size_t i = 0; i < input->numel(); ++i) {
            const double v = input->values[i];
            stats->note(std::abs(std::abs(v) - clip));
            stats->gate(v < -clip ? 0u : (v > clip ? 2u : 1u));
            if (!surrogate) stats->gate(v >= 0.0 ? 4u : 3u);
        }
        for (std::size_t i = 0; i < latent.kernels.numel(); ++i) {
            const double v = latent.kernels.values[i];
            stats->note(std::abs(std::abs(v) - clip));
            stats->gate(v < -clip ? 0u : (v > clip ? 2u : 1u));
            if (!surrogate) stats->gate(v >= 0.0 ? 4u : 3u);
        }
    }

    Tensor out;
    if (!surrogate) {
        // sign mode: the packed XNOR/popcount kernel produces exactly the
        // same integers as the +-1 real product
        SignTensor xs;
        xs.shape = {batch, c_in, len};
        xs.signs.resize(input->numel());
        for (std::size_t i = 0; i < input->numel(); ++i)
            xs.signs[i] = input->values[i] >= 0.0 ? 1 : -1;
        SignTensor kf = binarize(latent.kernels);
        kf.shape = {n_out, c_in * f};
        out = packed_binary_conv1d(xs, pack(kf), n_out, f, pad, stride);
    } else {
        // surrogate mode: contiguous (c_in*f) patch per (b, t) dotted
        // against every clamped kernel row
        out = Tensor({batch, n_out, l_out});
        std::vector<double> xpatch(static_cast<std::size_t>(c_in) * f);
        for (int b = 0; b < batch; ++b) {
            const double* xb_b = xb.data() + static_cast<std::size_t>(b) * c_in * lp;
            double* out_b = out.values.data() + static_cast<std::size_t>(b) * n_out * l_out;
            for (int t = 0; t < l_out; ++t) {
                const int start = t * stride;
                for (int c = 0; c < c_in; ++c)
                    for (int j = 0; j < f; ++j)
                        xpatch[static_cast<std::size_t>(c) * f + j] =
                            xb_b[static_cast<std::size_t>(c) * lp + start + j];
                for (int n = 0; n < n_out; ++n) {
                    const double* wrow = wb.data() + static_cast<std::size_t>(n) * c_in * f;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < xpatch.size(); ++i) acc += wrow[i] * xpatch[i];
                    out_b[static_cast<std::size_t>(n) * l_out + t] = acc;
                }
            }
        }
    }

    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<BinaryConv1dNode>();
        node->x = input;
        node->y = y;
        node->latent = &latent;
        node->xb_padded = std::move(xb);
        node->wb = std::move(wb);
        node->batch = batch;
        node->c_in = c_in;
        node->len = len;
        node->pad = pad;
        node->stride = stride;
        node->n_out = n_out;
        node->f = f;
        node->l_out = l_out;
        node->clip = clip;
        tape->record(std::move(node));
    }
    return y;
}

Var binary_dense_forward(Tape* tape, const Var& input, Tensor& latent_weights, bool surrogate, double clip,
                         ForwardStats* stats) {
    require(input->shape.size() == 2, "binary_dense input must be [B, D]");
    require(latent_weights.shape.size() == 2, "binary_dense latent weights must be [D, K]");
    const int batch = input->dim(0), d = input->dim(1);
    if (latent_weights.dim(0) != d)
        throw DimensionError("binary_dense inner axis mismatch: input D=" + std::to_string(d) +
                             " vs weights D=" + std::to_string(latent_weights.dim(0)));
    const int k = latent_weights.dim(1);
    const double scale = 1.0 / static_cast<double>(d);

    std::vector<double> xb(input->numel());
    for (std::size_t i = 0; i < xb.size(); ++i) xb[i] = binfn(input->values[i], surrogate, clip);
    std::vector<double> wb(latent_weights.numel());
    for (std::size_t i = 0; i < wb.size(); ++i) wb[i] = binfn(latent_weights.values[i], surrogate, clip);

    if (stats) {
        for (std::size_t i = 0; i < input->numel(); ++i) {
            const double v = input->values[i];
            stats->note(std::abs(std::abs(v) - clip));
            stats->gate(v < -clip ? 0u : (v > clip ? 2u : 1u));
            if (!surrogate) stats->gate(v >= 0.0 ? 4u : 3u);
        }
        for (std::size_t i = 0; i < latent_weights.numel(); ++i) {
            const double v = latent_weights.values[i];
            stats->note(std::abs(std::abs(v) - clip));
            stats->gate(v < -clip ? 0u : (v > clip ? 2u : 1u));
            if (!surrogate) stats->gate(v >= 0.0 ? 4u : 3u);
        }
    }

    Tensor out({batch, k});
    for (int b = 0; b < batch; ++b) {
        const double* xrow = xb.data() + static_cast<std::size_t>(b) * d;
        double* orow = out.values.data() + static_cast<std::size_t>(b) * k;
        for (int i = 0; i < d; ++i) {
            const double xv = xrow[i];
            const double* wrow = wb.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) orow[j] += xv * wrow[j];
        }
        for (int j = 0; j < k; ++j) orow[j] *= scale;
    }

    Var y = make_var(std::move(out));
    if (tape) {
        auto node = std::make_unique<BinaryDenseNode>();
        node->x = input;
        node->y = y;
        node->latent = &latent_weights;
        node->xb = std::move(xb);
        node->wb = std::move(wb);
        node->batch = batch;
        node->d = d;
        node->k = k;
        node->scale = scale;
        node->clip = clip;
        tape->record(std::move(node));
    }
    return y;
}

}  // namespace rofdec
