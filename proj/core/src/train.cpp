#include "rofdec/train.hpp"

#include <cmath>
#include <cstring>

#include "rofdec/errors.hpp"
#include "rofdec/evaluate.hpp"
#include "rofdec/rng.hpp"

namespace rofdec {

namespace {

void fill_batch(const WindowedDataset& ds, const std::vector<std::int64_t>& order, std::int64_t at,
                int batch, Tensor& inputs, Tensor& onehot) {
    const int width = ds.width();
    inputs = Tensor({batch, 1, width});
    onehot = Tensor({batch, 2});
    for (int b = 0; b < batch; ++b) {
        const std::int64_t k = order[static_cast<std::size_t>(at + b)];
        std::memcpy(inputs.values.data() + static_cast<std::size_t>(b) * width,
                    ds.inputs.values.data() + static_cast<std::size_t>(k) * width,
                    sizeof(double) * static_cast<std::size_t>(width));
        onehot.values[static_cast<std::size_t>(b) * 2 + ds.labels[static_cast<std::size_t>(k)]] = 1.0;
    }
}

}  // namespace

TrainTrace train(Model& model, const WindowedDataset& train_set, const WindowedDataset& test_set,
                 const TrainConfig& cfg) {
    if (!model.trainable()) return {};  // threshold: nothing to train
    if (train_set.size() < 1 || test_set.size() < 1) throw DataError("train/test sets must be non-empty");
    if (cfg.batch_size < 1) throw DataError("batch_size must be >= 1");

    auto params = model.params();
    AdamState adam = make_adam(params, cfg.lr);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5afull));

    std::vector<std::int64_t> order(static_cast<std::size_t>(train_set.size()));
    for (std::int64_t i = 0; i < train_set.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    TrainTrace trace;
    int iteration = 0;
    int evals_since_best = 0;
    bool stop = false;
    Tensor inputs, onehot;

    while (!stop && iteration < cfg.max_iterations) {
        shuffle_rng.shuffle(order);  // new epoch
        for (std::int64_t at = 0; at < train_set.size() && !stop; at += cfg.batch_size) {
            const int batch = static_cast<int>(
                std::min<std::int64_t>(cfg.batch_size, train_set.size() - at));
            fill_batch(train_set, order, at, batch, inputs, onehot);

            Tape tape;
            model.zero_grad();
            Var logits = model.forward(&tape, inputs, /*train_mode=*/true, /*update_running=*/true);
            LossResult loss = softmax_cross_entropy(&tape, logits, onehot);
            const double loss_value = loss.loss->values[0];
            if (!std::isfinite(loss_value))
                throw NumericError("training diverged at iteration " + std::to_string(iteration + 1) +
                                   " (non-finite loss)");
            backward(tape, loss.loss);
            adam_step(params, adam);
            ++iteration;

            if (iteration % cfg.eval_every == 0 || iteration >= cfg.max_iterations) {
                const EvalResult er = evaluate_ber(model, test_set);
                const double accuracy = 1.0 - er.ber;
                trace.rows.push_back({iteration, loss_value, accuracy});
                if (!trace.iterations_to_target && accuracy >= cfg.target_accuracy)
                    trace.iterations_to_target = iteration;
                if (accuracy > trace.best_accuracy) {
                    trace.best_accuracy = accuracy;
                    evals_since_best = 0;
                } else {
                    ++evals_since_best;
                }
                if (trace.iterations_to_target && evals_since_best >= cfg.patience_evals) stop = true;
            }
            if (iteration >= cfg.max_iterations) stop = true;
        }
    }
    trace.final_iteration = iteration;
    return trace;
}

}  // namespace rofdec
