#include "rofdec/adam.hpp"

#include <algorithm>
#include <cmath>

#include "rofdec/errors.hpp"

namespace rofdec {

AdamState make_adam(const std::vector<ParamRef>& params, double lr) {
    AdamState s;
    s.lr = lr;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const ParamRef& p : params) {
        s.m.emplace_back(p.tensor->numel(), 0.0);
        s.v.emplace_back(p.tensor->numel(), 0.0);
    }
    return s;
}

void adam_step(const std::vector<ParamRef>& params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw StateError("adam state tracks " + std::to_string(state.m.size()) + " tensors but got " +
                         std::to_string(params.size()));
    for (const ParamRef& p : params) {
        if (p.tensor->grad.size() != p.tensor->numel())
            throw StateError("adam_step: parameter '" + p.name + "' has no gradient");
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& tensor = *params[pi].tensor;
        std::vector<double>& m = state.m[pi];
        std::vector<double>& v = state.v[pi];
        for (std::size_t i = 0; i < tensor.numel(); ++i) {
            const double g = tensor.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            tensor.values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
        if (params[pi].clamp_unit) {
            for (double& x : tensor.values) x = std::clamp(x, -1.0, 1.0);
        }
    }
}

}  // namespace rofdec
