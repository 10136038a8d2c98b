#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rofdec/dataset.hpp"
#include "rofdec/model.hpp"

namespace rofdec {

struct TrainConfig {
    int batch_size = 1024;        // paper's operating point
    double lr = 0.0005;
    int max_iterations = 2000;
    double target_accuracy = 0.985;
    int eval_every = 10;          // optimizer steps between test evaluations
    int patience_evals = 20;      // evals without improvement after target
    std::uint64_t seed = 1;
};

struct TraceRow {
    int iteration;
    double train_loss;
    double test_accuracy;
};

struct TrainTrace {
    std::vector<TraceRow> rows;
    std::optional<int> iterations_to_target;
    int final_iteration = 0;
    double best_accuracy = 0.0;

    bool converged() const { return iterations_to_target.has_value(); }
};

// Mini-batch Adam training with seeded epoch shuffles, batch-norm in train
// mode, periodic infer-mode test evaluation. Records iterations_to_target at
// the first evaluation reaching cfg.target_accuracy; stops at max_iterations
// or patience_evals evaluations without improvement once the target is met.
// Throws NumericError naming the iteration if the loss goes non-finite.
TrainTrace train(Model& model, const WindowedDataset& train_set, const WindowedDataset& test_set,
                 const TrainConfig& cfg);

}  // namespace rofdec
