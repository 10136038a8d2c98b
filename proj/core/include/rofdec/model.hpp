#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rofdec/adam.hpp"
#include "rofdec/binary.hpp"
#include "rofdec/ops.hpp"

namespace rofdec {

enum class ModelKind { Cnn, Bcnn, Fcnn, Threshold };

ModelKind model_kind_from_string(const std::string& name);
std::string model_kind_name(ModelKind kind);

// Declarative layer description; presets are built from these and dims are
// checked by shape inference at build time.
struct LayerSpec {
    enum class Type { Conv, BinaryConv, BatchNorm, LeakyRelu, MaxPool, Flatten, Dense, BinaryDense };
    Type type;
    int channels = 0;     // conv n_out / dense d_out
    int kernel = 0;       // conv kernel size f
    double slope = 0.2;   // leaky relu
    int window = 2;       // pool
    int stride = 2;       // pool
};

struct ModelSpec {
    ModelKind kind = ModelKind::Cnn;
    std::vector<LayerSpec> layers;  // empty = use the preset for `kind`
    std::uint64_t seed = 1;
};

struct Conv1dLayer {
    ConvParams p;
};
struct BinaryConv1dLayer {
    ConvParams latent;
    double clip = 1.0;
};
struct BatchNormLayer {
    BatchNormState s;
};
struct LeakyReluLayer {
    double slope = 0.2;
};
struct MaxPool1dLayer {
    int window = 2;
    int stride = 2;
};
struct FlattenLayer {};
struct DenseLayer {
    Tensor w, b;
};
struct BinaryDenseLayer {
    Tensor latent_w;
    double clip = 1.0;
};

using Layer = std::variant<Conv1dLayer, BinaryConv1dLayer, BatchNormLayer, LeakyReluLayer,
                           MaxPool1dLayer, FlattenLayer, DenseLayer, BinaryDenseLayer>;

class Model {
public:
    ModelKind kind = ModelKind::Threshold;
    std::uint64_t seed = 0;
    std::vector<Layer> layers;
    // When set, binarizations run as clamps so finite differences of the
    // forward match the STE backward exactly (gradient checking only).
    bool surrogate_binary = false;

    bool trainable() const { return kind != ModelKind::Threshold; }
    bool has_binary_layers() const;

    // batch [B, 1, 16] (conv presets) or [B, D] after internal flatten for
    // the FC preset; returns logits [B, K]. update_running folds batch
    // statistics into batch-norm running estimates (training steps only).
    Var forward(Tape* tape, const Tensor& batch, bool train_mode, bool update_running,
                ForwardStats* stats = nullptr);

    std::vector<ParamRef> params();
    std::int64_t param_count();
    std::uint64_t param_hash() const;
    void zero_grad();
};

Model build_model(const ModelSpec& spec);

// Preset layer stacks (input [B, 1, 16], two logits).
std::vector<LayerSpec> preset_layers(ModelKind kind);

void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace rofdec
