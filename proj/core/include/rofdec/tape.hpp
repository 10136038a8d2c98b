#pragma once

#include <memory>
#include <vector>

#include "rofdec/tensor.hpp"

namespace rofdec {

using Var = std::shared_ptr<Tensor>;

inline Var make_var(Tensor t) { return std::make_shared<Tensor>(std::move(t)); }

struct TapeNode {
    virtual ~TapeNode() = default;
    virtual void backward() = 0;
};

// Ordered record of the forward pass; backward replays it strictly in
// reverse. A tape is single use: one recorded forward, one backward.
class Tape {
public:
    void record(std::unique_ptr<TapeNode> node) {
        nodes_.push_back(std::move(node));
        armed_ = true;
    }
    bool armed() const { return armed_; }
    std::size_t size() const { return nodes_.size(); }
    void reset() {
        nodes_.clear();
        armed_ = false;
    }

    friend void backward(Tape& tape, const Var& loss);

private:
    std::vector<std::unique_ptr<TapeNode>> nodes_;
    bool armed_ = false;
};

// Seeds d(loss) = 1 and propagates gradients through the tape in reverse.
// Throws StateError when no forward was recorded or backward already ran.
void backward(Tape& tape, const Var& loss);

}  // namespace rofdec
