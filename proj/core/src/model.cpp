#include "rofdec/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rofdec/errors.hpp"
#include "rofdec/rng.hpp"
#include "rofdec/stats.hpp"

namespace rofdec {

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "cnn") return ModelKind::Cnn;
    if (name == "bcnn") return ModelKind::Bcnn;
    if (name == "fcnn") return ModelKind::Fcnn;
    if (name == "threshold") return ModelKind::Threshold;
    throw ConfigError("unknown model kind: " + name);
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Cnn: return "cnn";
        case ModelKind::Bcnn: return "bcnn";
        case ModelKind::Fcnn: return "fcnn";
        case ModelKind::Threshold: return "threshold";
    }
    return "?";
}

std::vector<LayerSpec> preset_layers(ModelKind kind) {
    using T = LayerSpec::Type;
    std::vector<LayerSpec> ls;
    auto conv = [&](T t, int n, int k) {
        LayerSpec s;
        s.type = t;
        s.channels = n;
        s.kernel = k;
        ls.push_back(s);
    };
    auto plain = [&](T t) {
        LayerSpec s;
        s.type = t;
        ls.push_back(s);
    };
    auto dense = [&](T t, int n) {
        LayerSpec s;
        s.type = t;
        s.channels = n;
        ls.push_back(s);
    };

    switch (kind) {
        case ModelKind::Cnn:
            // two conv blocks, 8 then 16 kernel sets of size 1x3; 16 -> 8 -> 4
            conv(T::Conv, 8, 3);
            plain(T::BatchNorm);
            plain(T::LeakyRelu);
            plain(T::MaxPool);
            conv(T::Conv, 16, 3);
            plain(T::BatchNorm);
            plain(T::LeakyRelu);
            plain(T::MaxPool);
            plain(T::Flatten);
            dense(T::Dense, 2);
            break;
        case ModelKind::Bcnn:
            // three binarized blocks, 48/64/72 kernel sets of size 1x5;
            // pooling after the first two blocks keeps the 16-sample window
            // consistent: 16 -> 8 -> 4 -> 4
            conv(T::BinaryConv, 48, 5);
            plain(T::BatchNorm);
            plain(T::LeakyRelu);
            plain(T::MaxPool);
            conv(T::BinaryConv, 64, 5);
            plain(T::BatchNorm);
            plain(T::LeakyRelu);
            plain(T::MaxPool);
            conv(T::BinaryConv, 72, 5);
            plain(T::BatchNorm);
            plain(T::LeakyRelu);
            plain(T::Flatten);
            dense(T::BinaryDense, 2);
            break;
        case ModelKind::Fcnn:
            // reference fully-connected net: 4 hidden layers 56/60/64/52
            plain(T::Flatten);
            dense(T::Dense, 56);
            plain(T::LeakyRelu);
            dense(T::Dense, 60);
            plain(T::LeakyRelu);
            dense(T::Dense, 64);
            plain(T::LeakyRelu);
            dense(T::Dense, 52);
            plain(T::LeakyRelu);
            dense(T::Dense, 2);
            break;
        case ModelKind::Threshold:
            break;
    }
    return ls;
}

namespace {

// fan-in scaled normal init with gain matched to Leaky-ReLU(0.2)
void kaiming_fill(Tensor& t, int fan_in, Rng& rng) {
    const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
    const double stddev = gain / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values) v = stddev * rng.normal();
}

}  // namespace

Model build_model(const ModelSpec& spec) {
    Model m;
    m.kind = spec.kind;
    m.seed = spec.seed;
    if (spec.kind == ModelKind::Threshold) {
        if (!spec.layers.empty()) throw DimensionError("threshold model takes no layers");
        return m;
    }

    const std::vector<LayerSpec> specs = spec.layers.empty() ? preset_layers(spec.kind) : spec.layers;
    if (specs.empty()) throw DimensionError("model spec has no layers");
    Rng rng(mix_seed(spec.seed, 0x1417ull));

    // shape inference from the canonical [1, 16] input window
    int ch = 1, len = 16;
    bool flat = false;
    int width = 0;

    using T = LayerSpec::Type;
    for (const LayerSpec& s : specs) {
        switch (s.type) {
            case T::Conv: {
                if (flat) throw DimensionError("conv layer after flatten in model spec");
                if (s.channels < 1 || s.kernel < 1 || s.kernel % 2 == 0)
                    throw DimensionError("conv layer needs odd kernel >= 1 and channels >= 1");
                Conv1dLayer l;
                l.p.kernels = Tensor({s.channels, ch, s.kernel});
                l.p.bias = Tensor({s.channels});
                l.p.padding = (s.kernel - 1) / 2;  // same-length
                l.p.stride = 1;
                kaiming_fill(l.p.kernels, ch * s.kernel, rng);
                m.layers.emplace_back(std::move(l));
                ch = s.channels;
                break;
            }
            case T::BinaryConv: {
                if (flat) throw DimensionError("conv layer after flatten in model spec");
                if (s.channels < 1 || s.kernel < 1 || s.kernel % 2 == 0)
                    throw DimensionError("conv layer needs odd kernel >= 1 and channels >= 1");
                BinaryConv1dLayer l;
                l.latent.kernels = Tensor({s.channels, ch, s.kernel});
                l.latent.padding = (s.kernel - 1) / 2;
                l.latent.stride = 1;
                kaiming_fill(l.latent.kernels, ch * s.kernel, rng);
                m.layers.emplace_back(std::move(l));
                ch = s.channels;
                break;
            }
            case T::BatchNorm: {
                if (flat) throw DimensionError("batchnorm after flatten in model spec");
                BatchNormLayer l;
                l.s = make_batchnorm(ch);
                m.layers.emplace_back(std::move(l));
                break;
            }
            case T::LeakyRelu: {
                m.layers.emplace_back(LeakyReluLayer{s.slope});
                break;
            }
            case T::MaxPool: {
                if (flat) throw DimensionError("maxpool after flatten in model spec");
                if (len < s.window)
                    throw DimensionError("maxpool window exceeds remaining length " + std::to_string(len));
                m.layers.emplace_back(MaxPool1dLayer{s.window, s.stride});
                len = (len - s.window) / s.stride + 1;
                break;
            }
            case T::Flatten: {
                if (flat) throw DimensionError("repeated flatten in model spec");
                m.layers.emplace_back(FlattenLayer{});
                flat = true;
                width = ch * len;
                break;
            }
            case T::Dense: {
                if (!flat) throw DimensionError("dense layer requires flatten first");
                DenseLayer l;
                l.w = Tensor({width, s.channels});
                l.b = Tensor({s.channels});
                kaiming_fill(l.w, width, rng);
                m.layers.emplace_back(std::move(l));
                width = s.channels;
                break;
            }
            case T::BinaryDense: {
                if (!flat) throw DimensionError("dense layer requires flatten first");
                BinaryDenseLayer l;
                l.latent_w = Tensor({width, s.channels});
                kaiming_fill(l.latent_w, width, rng);
                m.layers.emplace_back(std::move(l));
                width = s.channels;
                break;
            }
        }
    }
    if (!flat) throw DimensionError("model spec must end in a flattened logit layer");
    return m;
}

bool Model::has_binary_layers() const {
    for (const Layer& l : layers)
        if (std::holds_alternative<BinaryConv1dLayer>(l) || std::holds_alternative<BinaryDenseLayer>(l))
            return true;
    return false;
}

Var Model::forward(Tape* tape, const Tensor& batch, bool train_mode, bool update_running,
                   ForwardStats* stats) {
    if (!trainable()) throw StateError("threshold model has no forward pass");
    Var h = make_var(batch);
    for (Layer& layer : layers) {
        if (auto* c = std::get_if<Conv1dLayer>(&layer)) {
            h = conv1d_forward(tape, h, c->p);
        } else if (auto* bc = std::get_if<BinaryConv1dLayer>(&layer)) {
            h = binary_conv1d_forward(tape, h, bc->latent, surrogate_binary, bc->clip, stats);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            bn->s.mode = train_mode ? BnMode::Train : BnMode::Infer;
            h = batchnorm_forward(tape, h, bn->s, update_running && train_mode);
        } else if (auto* lr = std::get_if<LeakyReluLayer>(&layer)) {
            h = leaky_relu_forward(tape, h, lr->slope, stats);
        } else if (auto* mp = std::get_if<MaxPool1dLayer>(&layer)) {
            h = maxpool1d_forward(tape, h, mp->window, mp->stride, nullptr, stats);
        } else if (std::get_if<FlattenLayer>(&layer)) {
            h = flatten_forward(tape, h);
        } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
            h = dense_forward(tape, h, d->w, d->b);
        } else if (auto* bd = std::get_if<BinaryDenseLayer>(&layer)) {
            h = binary_dense_forward(tape, h, bd->latent_w, surrogate_binary, bd->clip, stats);
        }
    }
    return h;
}

std::vector<ParamRef> Model::params() {
    std::vector<ParamRef> out;
    int i = 0;
    for (Layer& layer : layers) {
        const std::string prefix = "layer" + std::to_string(i++) + ".";
        if (auto* c = std::get_if<Conv1dLayer>(&layer)) {
            out.push_back({&c->p.kernels, false, prefix + "conv.kernels"});
            out.push_back({&c->p.bias, false, prefix + "conv.bias"});
        } else if (auto* bc = std::get_if<BinaryConv1dLayer>(&layer)) {
            out.push_back({&bc->latent.kernels, true, prefix + "binary_conv.latent"});
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            out.push_back({&bn->s.gamma, false, prefix + "bn.gamma"});
            out.push_back({&bn->s.beta, false, prefix + "bn.beta"});
        } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
            out.push_back({&d->w, false, prefix + "dense.w"});
            out.push_back({&d->b, false, prefix + "dense.b"});
        } else if (auto* bd = std::get_if<BinaryDenseLayer>(&layer)) {
            out.push_back({&bd->latent_w, true, prefix + "binary_dense.latent"});
        }
    }
    return out;
}

std::int64_t Model::param_count() {
    std::int64_t n = 0;
    for (const ParamRef& p : params()) n += static_cast<std::int64_t>(p.tensor->numel());
    return n;
}

std::uint64_t Model::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const Layer& layer : layers) {
        if (auto* c = std::get_if<Conv1dLayer>(&layer)) {
            mix(c->p.kernels.values.data(), c->p.kernels.numel() * 8);
            mix(c->p.bias.values.data(), c->p.bias.numel() * 8);
        } else if (auto* bc = std::get_if<BinaryConv1dLayer>(&layer)) {
            mix(bc->latent.kernels.values.data(), bc->latent.kernels.numel() * 8);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            mix(bn->s.gamma.values.data(), bn->s.gamma.numel() * 8);
            mix(bn->s.beta.values.data(), bn->s.beta.numel() * 8);
            mix(bn->s.running_mean.data(), bn->s.running_mean.size() * 8);
            mix(bn->s.running_var.data(), bn->s.running_var.size() * 8);
        } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
            mix(d->w.values.data(), d->w.numel() * 8);
            mix(d->b.values.data(), d->b.numel() * 8);
        } else if (auto* bd = std::get_if<BinaryDenseLayer>(&layer)) {
            mix(bd->latent_w.values.data(), bd->latent_w.numel() * 8);
        }
    }
    return h;
}

void Model::zero_grad() {
    for (ParamRef& p : params()) p.tensor->drop_grad();
}

// ----------------------------------------------------------- serialization

namespace {

constexpr std::uint32_t kModelMagic = 0x314d4652u;  // "RFM1"

void write_tensor(std::ofstream& out, const Tensor& t) {
    const std::uint32_t rank = static_cast<std::uint32_t>(t.shape.size());
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (int d : t.shape) {
        const std::int32_t v = d;
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.numel() * 8));
}

Tensor read_tensor(std::ifstream& in) {
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 4);
    std::vector<int> shape(rank);
    for (auto& d : shape) {
        std::int32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        d = v;
    }
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.numel() * 8));
    return t;
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    const std::uint64_t n = v.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * 8));
}

std::vector<double> read_doubles(std::ifstream& in) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
    return v;
}

}  // namespace

void save_model(const Model& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open model file for writing: " + path);
    out.write(reinterpret_cast<const char*>(&kModelMagic), 4);
    const std::uint32_t kind = static_cast<std::uint32_t>(m.kind);
    out.write(reinterpret_cast<const char*>(&kind), 4);
    out.write(reinterpret_cast<const char*>(&m.seed), 8);
    const std::uint32_t n_layers = static_cast<std::uint32_t>(m.layers.size());
    out.write(reinterpret_cast<const char*>(&n_layers), 4);
    for (const Layer& layer : m.layers) {
        const std::uint32_t tag = static_cast<std::uint32_t>(layer.index());
        out.write(reinterpret_cast<const char*>(&tag), 4);
        if (auto* c = std::get_if<Conv1dLayer>(&layer)) {
            const std::int32_t pad = c->p.padding, stride = c->p.stride;
            out.write(reinterpret_cast<const char*>(&pad), 4);
            out.write(reinterpret_cast<const char*>(&stride), 4);
            write_tensor(out, c->p.kernels);
            write_tensor(out, c->p.bias);
        } else if (auto* bc = std::get_if<BinaryConv1dLayer>(&layer)) {
            const std::int32_t pad = bc->latent.padding, stride = bc->latent.stride;
            out.write(reinterpret_cast<const char*>(&pad), 4);
            out.write(reinterpret_cast<const char*>(&stride), 4);
            out.write(reinterpret_cast<const char*>(&bc->clip), 8);
            write_tensor(out, bc->latent.kernels);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
            out.write(reinterpret_cast<const char*>(&bn->s.epsilon), 8);
            out.write(reinterpret_cast<const char*>(&bn->s.momentum), 8);
            write_tensor(out, bn->s.gamma);
            write_tensor(out, bn->s.beta);
            write_doubles(out, bn->s.running_mean);
            write_doubles(out, bn->s.running_var);
        } else if (auto* lr = std::get_if<LeakyReluLayer>(&layer)) {
            out.write(reinterpret_cast<const char*>(&lr->slope), 8);
        } else if (auto* mp = std::get_if<MaxPool1dLayer>(&layer)) {
            const std::int32_t w = mp->window, s = mp->stride;
            out.write(reinterpret_cast<const char*>(&w), 4);
            out.write(reinterpret_cast<const char*>(&s), 4);
        } else if (std::get_if<FlattenLayer>(&layer)) {
            // no payload
        } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
            write_tensor(out, d->w);
            write_tensor(out, d->b);
        } else if (auto* bd = std::get_if<BinaryDenseLayer>(&layer)) {
            out.write(reinterpret_cast<const char*>(&bd->clip), 8);
            write_tensor(out, bd->latent_w);
        }
    }
    if (!out) throw ConfigError("short write to model file: " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file: " + path);
    std::uint32_t magic = 0, kind = 0, n_layers = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    if (magic != kModelMagic) throw DataError("not a model file (bad magic): " + path);
    in.read(reinterpret_cast<char*>(&kind), 4);
    Model m;
    m.kind = static_cast<ModelKind>(kind);
    in.read(reinterpret_cast<char*>(&m.seed), 8);
    in.read(reinterpret_cast<char*>(&n_layers), 4);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        std::uint32_t tag = 0;
        in.read(reinterpret_cast<char*>(&tag), 4);
        switch (tag) {
            case 0: {  // Conv1dLayer
                Conv1dLayer l;
                std::int32_t pad = 0, stride = 1;
                in.read(reinterpret_cast<char*>(&pad), 4);
                in.read(reinterpret_cast<char*>(&stride), 4);
                l.p.padding = pad;
                l.p.stride = stride;
                l.p.kernels = read_tensor(in);
                l.p.bias = read_tensor(in);
                m.layers.emplace_back(std::move(l));
                break;
            }
            case 1: {  // BinaryConv1dLayer
                BinaryConv1dLayer l;
                std::int32_t pad = 0, stride = 1;
                in.read(reinterpret_cast<char*>(&pad), 4);
                in.read(reinterpret_cast<char*>(&stride), 4);
                in.read(reinterpret_cast<char*>(&l.clip), 8);
                l.latent.padding = pad;
                l.latent.stride = stride;
                l.latent.kernels = read_tensor(in);
                m.layers.emplace_back(std::move(l));
                break;
            }
            case 2: {  // BatchNormLayer
                BatchNormLayer l;
                in.read(reinterpret_cast<char*>(&l.s.epsilon), 8);
                in.read(reinterpret_cast<char*>(&l.s.momentum), 8);
                l.s.gamma = read_tensor(in);
                l.s.beta = read_tensor(in);
                l.s.running_mean = read_doubles(in);
                l.s.running_var = read_doubles(in);
                m.layers.emplace_back(std::move(l));
                break;
            }
            case 3: {  // LeakyReluLayer
                LeakyReluLayer l;
                in.read(reinterpret_cast<char*>(&l.slope), 8);
                m.layers.emplace_back(l);
                break;
            }
            case 4: {  // MaxPool1dLayer
                std::int32_t w = 2, s = 2;
                in.read(reinterpret_cast<char*>(&w), 4);
                in.read(reinterpret_cast<char*>(&s), 4);
                m.layers.emplace_back(MaxPool1dLayer{w, s});
                break;
            }
            case 5: {  // FlattenLayer
                m.layers.emplace_back(FlattenLayer{});
                break;
            }
            case 6: {  // DenseLayer
                DenseLayer l;
                l.w = read_tensor(in);
                l.b = read_tensor(in);
                m.layers.emplace_back(std::move(l));
                break;
            }
            case 7: {  // BinaryDenseLayer
                BinaryDenseLayer l;
                in.read(reinterpret_cast<char*>(&l.clip), 8);
                l.latent_w = read_tensor(in);
                m.layers.emplace_back(std::move(l));
                break;
            }
            default:
                throw DataError("model file has unknown layer tag " + std::to_string(tag) + ": " + path);
        }
    }
    if (!in) throw DataError("truncated model file: " + path);
    return m;
}

}  // namespace rofdec
