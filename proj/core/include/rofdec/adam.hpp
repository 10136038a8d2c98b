#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rofdec/tensor.hpp"

namespace rofdec {

// One trainable tensor of a model. clamp_unit marks latent weights of
// binarized layers, which are clipped to [-1, 1] after every step.
struct ParamRef {
    Tensor* tensor = nullptr;
    bool clamp_unit = false;
    std::string name;
};

struct AdamState {
    std::int64_t step_count = 0;
    double lr = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // one slot pair per parameter tensor, same ordering as the param list
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

AdamState make_adam(const std::vector<ParamRef>& params, double lr = 0.0005);

// Bias-corrected Adam update over every parameter; requires gradients on all
// of them (StateError otherwise). Gradients are left untouched.
void adam_step(const std::vector<ParamRef>& params, AdamState& state);

}  // namespace rofdec
