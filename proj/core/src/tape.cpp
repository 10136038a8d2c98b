#include "rofdec/tape.hpp"

#include "rofdec/errors.hpp"

namespace rofdec {

void backward(Tape& tape, const Var& loss) {
    if (tape.nodes_.empty()) throw StateError("backward called on an empty tape (no forward recorded)");
    if (!tape.armed_) throw StateError("backward called twice on the same tape; record a new forward first");
    if (!loss || loss->numel() != 1)
        throw StateError("backward expects a scalar loss tensor");
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) (*it)->backward();
    tape.armed_ = false;
}

}  // namespace rofdec
