#include "rofdec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>

#include "rofdec/errors.hpp"
#include "rofdec/ops.hpp"
#include "rofdec/binary.hpp"
#include "rofdec/rng.hpp"

namespace rofdec {

namespace {

using LossFn = std::function<double(ForwardStats*)>;

double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

// FD sweep over selected indices of one tensor against its recorded analytic
// gradient. A probe is discarded when either displaced forward takes a
// different gate path than the base forward.
void fd_sweep(Tensor& t, const std::vector<double>& analytic, const std::vector<std::size_t>& idx,
              const LossFn& loss_fn, std::uint64_t base_gates, const GradCheckOptions& opt,
              const std::string& name, GradCheckReport& report) {
    for (std::size_t i : idx) {
        const double a = analytic[i];
        const double saved = t.values[i];
        ForwardStats up_stats, down_stats;
        t.values[i] = saved + opt.h;
        const double up = loss_fn(&up_stats);
        t.values[i] = saved - opt.h;
        const double down = loss_fn(&down_stats);
        t.values[i] = saved;
        if (up_stats.gate_hash != base_gates || down_stats.gate_hash != base_gates) {
            ++report.kink_skips;
            continue;
        }
        const double fd = (up - down) / (2.0 * opt.h);
        if (std::abs(a) < opt.skip_below && std::abs(fd) < opt.skip_below) {
            ++report.skipped;
            continue;
        }
        ++report.checked;
        const double e = rel_err(a, fd);
        if (e > report.max_rel_err) {
            report.max_rel_err = e;
            report.worst_param = name + "[" + std::to_string(i) + "]";
        }
    }
}

std::vector<std::size_t> sample_indices(std::size_t numel, int want, Rng& rng) {
    std::vector<std::size_t> idx;
    if (static_cast<std::size_t>(want) >= numel) {
        idx.resize(numel);
        for (std::size_t i = 0; i < numel; ++i) idx[i] = i;
        return idx;
    }
    std::vector<std::size_t> all(numel);
    for (std::size_t i = 0; i < numel; ++i) all[i] = i;
    rng.shuffle(all);
    idx.assign(all.begin(), all.begin() + want);
    return idx;
}

}  // namespace

GradCheckReport grad_check_model(Model& model, const WindowedDataset& source, int batch_size,
                                 const GradCheckOptions& opt) {
    if (!model.trainable()) throw StateError("cannot gradient-check a threshold model");
    const bool saved_surrogate = model.surrogate_binary;
    model.surrogate_binary = model.has_binary_layers();

    GradCheckReport report;
    Rng rng(mix_seed(opt.seed, 0xc4ec4ull));
    const int width = source.width();

    Tensor inputs({batch_size, 1, width});
    Tensor onehot({batch_size, 2});
    for (int b = 0; b < batch_size; ++b) {
        const std::int64_t k =
            static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(source.size())));
        std::memcpy(inputs.values.data() + static_cast<std::size_t>(b) * width,
                    source.inputs.values.data() + static_cast<std::size_t>(k) * width,
                    sizeof(double) * static_cast<std::size_t>(width));
        onehot.values[static_cast<std::size_t>(b) * 2 + source.labels[static_cast<std::size_t>(k)]] = 1.0;
    }

    LossFn loss_fn = [&](ForwardStats* stats) {
        Var logits = model.forward(nullptr, inputs, /*train_mode=*/true, /*update_running=*/false, stats);
        return softmax_cross_entropy(nullptr, logits, onehot).loss->values[0];
    };

    ForwardStats base;
    loss_fn(&base);

    // analytic gradients
    model.zero_grad();
    Tape tape;
    Var logits = model.forward(&tape, inputs, true, false);
    LossResult loss = softmax_cross_entropy(&tape, logits, onehot);
    backward(tape, loss.loss);

    for (ParamRef& p : model.params()) {
        if (!p.tensor->has_grad())
            throw StateError("gradient missing on parameter '" + p.name + "' after backward");
        const std::vector<double> analytic = p.tensor->grad;
        const std::vector<std::size_t> idx = sample_indices(p.tensor->numel(), opt.samples_per_tensor, rng);
        fd_sweep(*p.tensor, analytic, idx, loss_fn, base.gate_hash, opt, p.name, report);
    }

    model.surrogate_binary = saved_surrogate;
    return report;
}

// ------------------------------------------------------------ layer checks

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values) v = scale * rng.normal();
    return t;
}

struct LayerScenario {
    std::vector<std::pair<std::string, Tensor*>> check;
    std::function<double(Tape*, ForwardStats*)> loss;
};

GradCheckReport run_scenario(LayerScenario& sc, const GradCheckOptions& opt) {
    GradCheckReport report;
    Rng rng(mix_seed(opt.seed, 0x1a9e5ull));

    for (auto& [name, t] : sc.check) t->drop_grad();
    ForwardStats base;
    Tape tape;
    sc.loss(&tape, &base);  // records gradients via backward inside

    LossFn loss_fn = [&](ForwardStats* stats) { return sc.loss(nullptr, stats); };
    for (auto& [name, t] : sc.check) {
        if (!t->has_grad()) throw StateError("gradient missing on '" + name + "' in layer check");
        const std::vector<double> analytic = t->grad;
        const std::vector<std::size_t> idx = sample_indices(t->numel(), opt.samples_per_tensor, rng);
        fd_sweep(*t, analytic, idx, loss_fn, base.gate_hash, opt, name, report);
    }
    return report;
}

}  // namespace

const std::vector<std::string>& grad_check_layer_names() {
    static const std::vector<std::string> names = {
        "conv1d", "dense", "leaky_relu", "batchnorm", "maxpool1d",
        "softmax_cross_entropy", "binary_conv1d", "binary_dense",
    };
    return names;
}

GradCheckReport grad_check_layer(const std::string& layer_name, std::uint64_t seed) {
    GradCheckOptions opt;
    opt.seed = seed;
    opt.samples_per_tensor = 1 << 20;  // exhaustive at these sizes
    Rng rng(mix_seed(seed, 0x7a13ull));

    if (layer_name == "conv1d") {
        Tensor input = random_tensor({2, 3, 10}, rng);
        ConvParams p;
        p.kernels = random_tensor({4, 3, 3}, rng, 0.5);
        p.bias = random_tensor({4}, rng, 0.5);
        p.padding = 1;
        Tensor w = random_tensor({2, 4, 10}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}, {"kernels", &p.kernels}, {"bias", &p.bias}};
        sc.loss = [&](Tape* tape, ForwardStats*) {
            Var x = make_var(input);
            Var y = conv1d_forward(tape, x, p);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;  // scenario tensor was copied into the var
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "dense") {
        Tensor input = random_tensor({5, 7}, rng);
        Tensor wgt = random_tensor({7, 2}, rng, 0.5);
        Tensor bias = random_tensor({2}, rng, 0.5);
        Tensor w = random_tensor({5, 2}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}, {"weights", &wgt}, {"bias", &bias}};
        sc.loss = [&](Tape* tape, ForwardStats*) {
            Var x = make_var(input);
            Var y = dense_forward(tape, x, wgt, bias);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "leaky_relu") {
        Tensor input = random_tensor({2, 4, 8}, rng);
        Tensor w = random_tensor({2, 4, 8}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}};
        sc.loss = [&](Tape* tape, ForwardStats* stats) {
            Var x = make_var(input);
            Var y = leaky_relu_forward(tape, x, 0.2, stats);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "batchnorm") {
        Tensor input = random_tensor({4, 3, 8}, rng);
        BatchNormState s = make_batchnorm(3);
        for (double& v : s.gamma.values) v = 1.0 + 0.3 * rng.normal();
        for (double& v : s.beta.values) v = 0.3 * rng.normal();
        Tensor w = random_tensor({4, 3, 8}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}, {"gamma", &s.gamma}, {"beta", &s.beta}};
        sc.loss = [&](Tape* tape, ForwardStats*) {
            s.mode = BnMode::Train;
            Var x = make_var(input);
            Var y = batchnorm_forward(tape, x, s, /*update_running=*/false);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "maxpool1d") {
        Tensor input = random_tensor({2, 3, 8}, rng);
        Tensor w = random_tensor({2, 3, 4}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}};
        sc.loss = [&](Tape* tape, ForwardStats* stats) {
            Var x = make_var(input);
            Var y = maxpool1d_forward(tape, x, 2, 2, nullptr, stats);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "softmax_cross_entropy") {
        Tensor logits = random_tensor({4, 2}, rng, 2.0);
        Tensor labels({4, 2});
        for (int b = 0; b < 4; ++b) labels.values[static_cast<std::size_t>(b) * 2 + rng.bit()] = 1.0;
        LayerScenario sc;
        sc.check = {{"logits", &logits}};
        sc.loss = [&](Tape* tape, ForwardStats*) {
            Var x = make_var(logits);
            LossResult lr = softmax_cross_entropy(tape, x, labels);
            if (tape) {
                backward(*tape, lr.loss);
                logits.grad = x->grad;
            }
            return lr.loss->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "binary_conv1d") {
        Tensor input = random_tensor({2, 3, 10}, rng, 0.4);
        ConvParams latent;
        latent.kernels = random_tensor({4, 3, 3}, rng, 0.3);
        latent.padding = 1;
        Tensor w = random_tensor({2, 4, 10}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}, {"latent", &latent.kernels}};
        sc.loss = [&](Tape* tape, ForwardStats* stats) {
            Var x = make_var(input);
            Var y = binary_conv1d_forward(tape, x, latent, /*surrogate=*/true, 1.0, stats);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    if (layer_name == "binary_dense") {
        Tensor input = random_tensor({3, 8}, rng, 0.4);
        Tensor latent = random_tensor({8, 2}, rng, 0.3);
        Tensor w = random_tensor({3, 2}, rng);
        LayerScenario sc;
        sc.check = {{"input", &input}, {"latent", &latent}};
        sc.loss = [&](Tape* tape, ForwardStats* stats) {
            Var x = make_var(input);
            Var y = binary_dense_forward(tape, x, latent, /*surrogate=*/true, 1.0, stats);
            Var l = reduce_sum(tape, y, &w);
            if (tape) {
                backward(*tape, l);
                input.grad = x->grad;
            }
            return l->values[0];
        };
        return run_scenario(sc, opt);
    }
    throw ConfigError("unknown layer for gradient check: " + layer_name);
}

}  // namespace rofdec
