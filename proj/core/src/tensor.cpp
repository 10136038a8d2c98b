#include "rofdec/tensor.hpp"

#include <cmath>
#include <sstream>

#include "rofdec/errors.hpp"

namespace rofdec {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    values.assign(shape_numel(shape), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_numel(shape) != values.size())
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
}

bool all_finite(const Tensor& t) {
    for (double v : t.values)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) throw NumericError(std::string("non-finite values in ") + what);
}

void accumulate_grad(Tensor& dst, const std::vector<double>& g) {
    if (g.size() != dst.values.size())
        throw DimensionError("gradient size " + std::to_string(g.size()) +
                             " does not match tensor of " + std::to_string(dst.values.size()));
    dst.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
}

}  // namespace rofdec
