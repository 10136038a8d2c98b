#include "rofdec/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <variant>

#include "rofdec/binary.hpp"
#include "rofdec/errors.hpp"

namespace rofdec {

namespace {

// Weight-side state reused across batches of one evaluation: packed sign
// kernels for binarized layers, folded scale/shift for inference batch norm.
template <typename Real>
struct LayerCache {
    PackedBits packed;                  // binary conv / dense
    int n_out = 0, c_in = 0, f = 0, padding = 0, stride = 1;
    Real dense_scale = 1;               // binary dense 1/fan_in
    // batch norm kept unfused so the arithmetic matches batchnorm_forward
    // exactly in double precision
    std::vector<Real> bn_mean, bn_istd, bn_gamma, bn_beta;
    std::vector<Real> weights, bias;    // real conv / dense
};

template <typename Real>
struct InferPlan {
    const Model* model;
    std::vector<LayerCache<Real>> cache;
};

template <typename Real>
InferPlan<Real> make_plan(const Model& m) {
    InferPlan<Real> plan;
    plan.model = &m;
    plan.cache.resize(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        LayerCache<Real>& lc = plan.cache[i];
        const Layer& layer = m.layers[i];
        if (auto* c = std::get_if<Conv1dLayer>(&layer)) {
            lc.n_out = c->p.n_out();
            lc.c_in = c->p.c_in();
            lc.f = c->p.f();
            lc.padding = c->p.padding;
            lc.stride = c->p.stride;
            lc.weights.assign(c->p.kernels.values.begin(), c->p.kernels.values.end());
            lc.bias.assign(c->p.bias.values.begin(), c->p.bias.values.end());
        } else if (auto* bc = std::get_if<BinaryConv1dLayer>(&layer)) {
            SignTensor k = binarize(bc->latent.kernels);
            k.shape = {bc->latent.n_out(), bc->latent.c_in() * bc->latent.f()};
            lc.packed = pack(k);
            lc.n_out = bc->latent.n_out();
            lc.c_in = bc->latent.c_in();
            lc.f = bc->latent.f();
            lc.padding = bc->latent.padding;
            lc.stride = bc->latent.stride;
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            const int ch = bn->s.gamma.dim(0);
            lc.bn_mean.resize(static_cast<std::size_t>(ch));
            lc.bn_istd.resize(static_cast<std::size_t>(ch));
            lc.bn_gamma.resize(static_cast<std::size_t>(ch));
            lc.bn_beta.resize(static_cast<std::size_t>(ch));
            for (int c2 = 0; c2 < ch; ++c2) {
                const std::size_t ci = static_cast<std::size_t>(c2);
                lc.bn_mean[ci] = static_cast<Real>(bn->s.running_mean[ci]);
                lc.bn_istd[ci] =
                    static_cast<Real>(1.0 / std::sqrt(bn->s.running_var[ci] + bn->s.epsilon));
                lc.bn_gamma[ci] = static_cast<Real>(bn->s.gamma.values[ci]);
                lc.bn_beta[ci] = static_cast<Real>(bn->s.beta.values[ci]);
            }
        } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
            lc.weights.assign(d->w.values.begin(), d->w.values.end());
            lc.bias.assign(d->b.values.begin(), d->b.values.end());
            lc.c_in = d->w.dim(0);
            lc.n_out = d->w.dim(1);
        } else if (auto* bd = std::get_if<BinaryDenseLayer>(&layer)) {
            // pack columns of [D, K] so each output unit owns one row
            const int dd = bd->latent_w.dim(0), k = bd->latent_w.dim(1);
            SignTensor t;
            t.shape = {k, dd};
            t.signs.resize(static_cast<std::size_t>(k) * dd);
            for (int j = 0; j < k; ++j)
                for (int di = 0; di < dd; ++di)
                    t.signs[static_cast<std::size_t>(j) * dd + di] =
                        bd->latent_w.values[static_cast<std::size_t>(di) * k + j] >= 0.0 ? 1 : -1;
            lc.packed = pack(t);
            lc.c_in = dd;
            lc.n_out = k;
            lc.dense_scale = static_cast<Real>(1.0 / static_cast<double>(dd));
        }
    }
    return plan;
}

// Runs the infer-mode forward over one batch buffer, returning logits in
// `buf` with rows of plan-final width.
template <typename Real>
void infer_batch(const InferPlan<Real>& plan, std::vector<Real>& buf, int batch, int& width_out) {
    const Model& m = *plan.model;
    int ch = 1, len = static_cast<int>(buf.size() / static_cast<std::size_t>(batch));
    bool flat = false;
    int width = 0;
    std::vector<Real> next;
    std::vector<std::uint64_t> patch;

    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const Layer& layer = m.layers[li];
        const LayerCache<Real>& lc = plan.cache[li];
        if (std::get_if<Conv1dLayer>(&layer)) {
            const int l_out = (len + 2 * lc.padding - lc.f) / lc.stride + 1;
            next.assign(static_cast<std::size_t>(batch) * lc.n_out * l_out, Real(0));
            for (int b = 0; b < batch; ++b) {
                for (int n = 0; n < lc.n_out; ++n) {
                    Real* orow = next.data() + (static_cast<std::size_t>(b) * lc.n_out + n) * l_out;
                    const Real bias = lc.bias[static_cast<std::size_t>(n)];
                    for (int t = 0; t < l_out; ++t) orow[t] = bias;
                    for (int c = 0; c < ch; ++c) {
                        const Real* xrow = buf.data() + (static_cast<std::size_t>(b) * ch + c) * len;
                        const Real* krow = lc.weights.data() + (static_cast<std::size_t>(n) * ch + c) * lc.f;
                        // same j-major accumulation order as the training path
                        for (int j = 0; j < lc.f; ++j) {
                            const int off = j - lc.padding;
                            const int t_lo = std::max(0, (-off + lc.stride - 1) / lc.stride);
                            const int t_hi = std::min(l_out - 1, (len - 1 - off) / lc.stride);
                            const Real kv = krow[j];
                            if (lc.stride == 1) {
                                const Real* xs = xrow + off;
                                for (int t = t_lo; t <= t_hi; ++t) orow[t] += kv * xs[t];
                            } else {
                                for (int t = t_lo; t <= t_hi; ++t)
                                    orow[t] += kv * xrow[t * lc.stride + off];
                            }
                        }
                    }
                }
            }
            buf.swap(next);
            ch = lc.n_out;
            len = l_out;
        } else if (std::get_if<BinaryConv1dLayer>(&layer)) {
            const int l_out = (len + 2 * lc.padding - lc.f) / lc.stride + 1;
            const int nbits = ch * lc.f;
            const int words = lc.packed.words_per_row;
            next.assign(static_cast<std::size_t>(batch) * lc.n_out * l_out, Real(0));
            patch.assign(static_cast<std::size_t>(words), 0ull);
            for (int b = 0; b < batch; ++b) {
                for (int t = 0; t < l_out; ++t) {
                    std::fill(patch.begin(), patch.end(), 0ull);
                    const int start = t * lc.stride - lc.padding;
                    int bit = 0;
                    for (int c = 0; c < ch; ++c) {
                        const Real* xrow = buf.data() + (static_cast<std::size_t>(b) * ch + c) * len;
                        for (int j = 0; j < lc.f; ++j, ++bit) {
                            const int idx = start + j;
                            const bool plus = (idx < 0 || idx >= len) ? true : xrow[idx] >= Real(0);
                            if (plus) patch[static_cast<std::size_t>(bit >> 6)] |= (1ull << (bit & 63));
                        }
                    }
                    for (int n = 0; n < lc.n_out; ++n) {
                        const std::int64_t dot =
                            xnor_popcount_dot(patch.data(), lc.packed.row(n), words, nbits);
                        next[(static_cast<std::size_t>(b) * lc.n_out + n) * l_out + t] =
                            static_cast<Real>(dot);
                    }
                }
            }
            buf.swap(next);
            ch = lc.n_out;
            len = l_out;
        } else if (std::get_if<BatchNormLayer>(&layer)) {
            for (int b = 0; b < batch; ++b)
                for (int c = 0; c < ch; ++c) {
                    Real* row = buf.data() + (static_cast<std::size_t>(b) * ch + c) * len;
                    const Real mu = lc.bn_mean[static_cast<std::size_t>(c)];
                    const Real is = lc.bn_istd[static_cast<std::size_t>(c)];
                    const Real g = lc.bn_gamma[static_cast<std::size_t>(c)];
                    const Real be = lc.bn_beta[static_cast<std::size_t>(c)];
                    for (int l = 0; l < len; ++l) row[l] = g * ((row[l] - mu) * is) + be;
                }
        } else if (auto* lr = std::get_if<LeakyReluLayer>(&layer)) {
            const Real slope = static_cast<Real>(lr->slope);
            for (Real& v : buf) v = v >= Real(0) ? v : slope * v;
        } else if (auto* mp = std::get_if<MaxPool1dLayer>(&layer)) {
            const int l_out = (len - mp->window) / mp->stride + 1;
            next.assign(static_cast<std::size_t>(batch) * ch * l_out, Real(0));
            for (int b = 0; b < batch; ++b)
                for (int c = 0; c < ch; ++c) {
                    const Real* row = buf.data() + (static_cast<std::size_t>(b) * ch + c) * len;
                    Real* orow = next.data() + (static_cast<std::size_t>(b) * ch + c) * l_out;
                    for (int t = 0; t < l_out; ++t) {
                        Real best = row[t * mp->stride];
                        for (int j = 1; j < mp->window; ++j)
                            best = std::max(best, row[t * mp->stride + j]);
                        orow[t] = best;
                    }
                }
            buf.swap(next);
            len = l_out;
        } else if (std::get_if<FlattenLayer>(&layer)) {
            flat = true;
            width = ch * len;  // same contiguous layout
        } else if (std::get_if<DenseLayer>(&layer)) {
            next.assign(static_cast<std::size_t>(batch) * lc.n_out, Real(0));
            for (int b = 0; b < batch; ++b) {
                const Real* xrow = buf.data() + static_cast<std::size_t>(b) * lc.c_in;
                Real* orow = next.data() + static_cast<std::size_t>(b) * lc.n_out;
                for (int j = 0; j < lc.n_out; ++j) orow[j] = lc.bias[static_cast<std::size_t>(j)];
                for (int i = 0; i < lc.c_in; ++i) {
                    const Real xv = xrow[i];
                    const Real* wrow = lc.weights.data() + static_cast<std::size_t>(i) * lc.n_out;
                    for (int j = 0; j < lc.n_out; ++j) orow[j] += xv * wrow[j];
                }
            }
            buf.swap(next);
            width = lc.n_out;
        } else if (std::get_if<BinaryDenseLayer>(&layer)) {
            const int words = lc.packed.words_per_row;
            next.assign(static_cast<std::size_t>(batch) * lc.n_out, Real(0));
            patch.assign(static_cast<std::size_t>(words), 0ull);
            for (int b = 0; b < batch; ++b) {
                std::fill(patch.begin(), patch.end(), 0ull);
                const Real* xrow = buf.data() + static_cast<std::size_t>(b) * lc.c_in;
                for (int i = 0; i < lc.c_in; ++i)
                    if (xrow[i] >= Real(0)) patch[static_cast<std::size_t>(i >> 6)] |= (1ull << (i & 63));
                Real* orow = next.data() + static_cast<std::size_t>(b) * lc.n_out;
                for (int j = 0; j < lc.n_out; ++j) {
                    const std::int64_t dot =
                        xnor_popcount_dot(patch.data(), lc.packed.row(j), words, lc.c_in);
                    orow[j] = static_cast<Real>(dot) * lc.dense_scale;
                }
            }
            buf.swap(next);
            width = lc.n_out;
        }
    }
    (void)flat;
    width_out = width;
}

template <typename Real>
EvalResult evaluate_with(const Model& m, const WindowedDataset& ds) {
    const InferPlan<Real> plan = make_plan<Real>(m);
    const int width = ds.width();
    const std::int64_t n = ds.size();
    constexpr std::int64_t kChunk = 4096;

    EvalResult r;
    r.count = n;
    std::vector<Real> buf;
    for (std::int64_t at = 0; at < n; at += kChunk) {
        const int batch = static_cast<int>(std::min(kChunk, n - at));
        buf.resize(static_cast<std::size_t>(batch) * width);
        const double* src = ds.inputs.values.data() + static_cast<std::size_t>(at) * width;
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<Real>(src[i]);
        int logit_width = 0;
        infer_batch(plan, buf, batch, logit_width);
        for (int b = 0; b < batch; ++b) {
            const Real* row = buf.data() + static_cast<std::size_t>(b) * logit_width;
            int best = 0;
            for (int j = 1; j < logit_width; ++j)
                if (row[j] > row[best]) best = j;
            if (best != static_cast<int>(ds.labels[static_cast<std::size_t>(at + b)])) ++r.errors;
        }
    }
    r.ber = static_cast<double>(r.errors) / static_cast<double>(r.count);
    return r;
}

}  // namespace

EvalResult evaluate_ber(const Model& m, const WindowedDataset& ds, EvalPrecision precision) {
    if (ds.size() == 0) throw DataError("evaluate_ber on an empty dataset");
    if (m.kind == ModelKind::Threshold) return hard_decision_baseline(ds);
    if (precision == EvalPrecision::F32) return evaluate_with<float>(m, ds);
    return evaluate_with<double>(m, ds);
}

EvalResult hard_decision_baseline(const WindowedDataset& ds) {
    if (ds.size() == 0) throw DataError("hard_decision_baseline on an empty dataset");
    const int width = ds.width();
    const int decide_at = ds.decide_index * ds.sps;
    EvalResult r;
    r.count = ds.size();
    for (std::int64_t k = 0; k < ds.size(); ++k) {
        const double v = ds.inputs.values[static_cast<std::size_t>(k) * width + decide_at] + ds.center;
        const int pred = v >= 0.0 ? 1 : 0;
        if (pred != static_cast<int>(ds.labels[static_cast<std::size_t>(k)])) ++r.errors;
    }
    r.ber = static_cast<double>(r.errors) / static_cast<double>(r.count);
    return r;
}

Tensor infer_logits(const Model& m, const Tensor& batch) {
    if (batch.shape.size() != 3) throw DimensionError("infer_logits batch must be [B, 1, W]");
    const InferPlan<double> plan = make_plan<double>(m);
    const int b = batch.dim(0);
    std::vector<double> buf = batch.values;
    int width = 0;
    infer_batch(plan, buf, b, width);
    return Tensor({b, width}, std::move(buf));
}

}  // namespace rofdec
