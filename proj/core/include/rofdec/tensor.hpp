#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rofdec {

// Dense row-major n-d array of doubles with an optional gradient slot.
// grad is empty until backward first touches the tensor.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> v);

    std::size_t numel() const { return values.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool has_grad() const { return !grad.empty(); }
    void ensure_grad();   // allocate zeros if absent
    void drop_grad() { grad.clear(); }
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

bool all_finite(const Tensor& t);
// Throws NumericError naming `what` if any value is NaN/Inf.
void check_finite(const Tensor& t, const char* what);

// dst.grad += g (allocating zeros first if needed); sizes must match.
void accumulate_grad(Tensor& dst, const std::vector<double>& g);

}  // namespace rofdec
