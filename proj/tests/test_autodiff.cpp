#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rofdec/adam.hpp"
#include "rofdec/dataset.hpp"
#include "rofdec/errors.hpp"
#include "rofdec/gradcheck.hpp"
#include "rofdec/model.hpp"
#include "rofdec/ops.hpp"
#include "testutil.hpp"

using namespace rofdec;

namespace {

// synthetic windows standing in for channel data
WindowedDataset synthetic_windows(int n, std::uint64_t seed) {
    WindowedDataset ds;
    ds.inputs = testutil::random_tensor({n, 1, 16}, seed, 0.8);
    ds.labels.resize(static_cast<std::size_t>(n));
    Rng rng(seed + 1);
    for (auto& l : ds.labels) l = static_cast<std::uint8_t>(rng.bit());
    return ds;
}

}  // namespace

TEST_CASE("gradient of a sum loss is all ones") {
    Tensor input = testutil::random_tensor({2, 3, 4}, 5);
    Tape tape;
    Var x = make_var(input);
    Var loss = reduce_sum(&tape, x);
    backward(tape, loss);
    REQUIRE(x->has_grad());
    for (double g : x->grad) CHECK(g == 1.0);
}

TEST_CASE("leaky relu gradient on the negative branch is slope times upstream") {
    Tape tape;
    Var x = make_var(Tensor({1, 1, 1}, {-2.0}));
    Var y = leaky_relu_forward(&tape, x, 0.2);
    Tensor w({1, 1, 1}, {3.0});  // upstream weight
    Var loss = reduce_sum(&tape, y, &w);
    backward(tape, loss);
    CHECK(x->grad[0] == doctest::Approx(0.2 * 3.0));
}

TEST_CASE("backward without a recorded forward is rejected") {
    Tape tape;
    Var loss = make_var(Tensor({1}, {0.0}));
    CHECK_THROWS_AS(backward(tape, loss), StateError);
}

TEST_CASE("backward twice on one tape is rejected") {
    Tape tape;
    Var x = make_var(Tensor({1, 1, 2}, {1, 2}));
    Var loss = reduce_sum(&tape, x);
    backward(tape, loss);
    CHECK_THROWS_AS(backward(tape, loss), StateError);
}

TEST_CASE("maxpool backward routes everything to the argmax") {
    Tape tape;
    Var x = make_var(Tensor({1, 1, 4}, {3, 1, 4, 1}));
    Var y = maxpool1d_forward(&tape, x);
    Tensor w({1, 1, 2}, {5.0, 7.0});
    Var loss = reduce_sum(&tape, y, &w);
    backward(tape, loss);
    CHECK(x->grad == std::vector<double>{5, 0, 7, 0});
}

TEST_CASE("per-layer finite-difference checks") {
    for (const std::string& layer : grad_check_layer_names()) {
        CAPTURE(layer);
        const GradCheckReport r = grad_check_layer(layer, 1234);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("full preset models match finite differences") {
    const WindowedDataset source = synthetic_windows(256, 42);
    for (ModelKind kind : {ModelKind::Cnn, ModelKind::Fcnn, ModelKind::Bcnn}) {
        CAPTURE(model_kind_name(kind));
        Model m = build_model({kind, {}, 99});
        GradCheckOptions opt;
        opt.samples_per_tensor = 24;
        opt.seed = 31;
        const GradCheckReport r = grad_check_model(m, source, 8, opt);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("corrupted conv backward is caught by the gradient check") {
    const WindowedDataset source = synthetic_windows(128, 43);
    Model m = build_model({ModelKind::Cnn, {}, 7});
    testing::corrupt_conv_backward(true);
    GradCheckOptions opt;
    opt.samples_per_tensor = 1 << 20;  // cover kernel element 0
    const GradCheckReport r = grad_check_model(m, source, 8, opt);
    testing::corrupt_conv_backward(false);
    CHECK(r.max_rel_err > 1e-4);
}

TEST_CASE("adam with zero gradients is the identity") {
    Tensor t = testutil::random_tensor({4, 4}, 8);
    const std::vector<double> before = t.values;
    t.ensure_grad();
    std::vector<ParamRef> params{{&t, false, "t"}};
    AdamState s = make_adam(params, 0.01);
    for (int i = 0; i < 3; ++i) adam_step(params, s);
    CHECK(t.values == before);
    CHECK(s.step_count == 3);
}

TEST_CASE("first adam step moves by about -lr * sign(gradient)") {
    Tensor t({3}, {1.0, 2.0, 3.0});
    t.grad = {0.5, -0.25, 4.0};
    std::vector<ParamRef> params{{&t, false, "t"}};
    AdamState s = make_adam(params, 0.0005);
    adam_step(params, s);
    CHECK(t.values[0] == doctest::Approx(1.0 - 0.0005).epsilon(1e-6));
    CHECK(t.values[1] == doctest::Approx(2.0 + 0.0005).epsilon(1e-6));
    CHECK(t.values[2] == doctest::Approx(3.0 - 0.0005).epsilon(1e-6));
}

TEST_CASE("adam defaults match the published constants") {
    AdamState s;
    CHECK(s.lr == 0.0005);
    CHECK(s.beta1 == 0.9);
    CHECK(s.beta2 == 0.999);
    CHECK(s.epsilon == 1e-8);
}

TEST_CASE("adam rejects parameters without gradients") {
    Tensor t({2}, {1.0, 2.0});
    std::vector<ParamRef> params{{&t, false, "t"}};
    AdamState s = make_adam(params);
    CHECK_THROWS_AS(adam_step(params, s), StateError);
}

TEST_CASE("adam clamps unit-flagged latents") {
    Tensor t({2}, {0.999999, -0.999999});
    t.grad = {-100.0, 100.0};
    std::vector<ParamRef> params{{&t, true, "latent"}};
    AdamState s = make_adam(params, 0.5);
    adam_step(params, s);
    CHECK(t.values[0] <= 1.0);
    CHECK(t.values[1] >= -1.0);
}

TEST_CASE("identical seeds give bitwise-identical parameter trajectories") {
    const WindowedDataset source = synthetic_windows(64, 44);
    auto run = [&](std::uint64_t seed) {
        Model m = build_model({ModelKind::Cnn, {}, seed});
        auto params = m.params();
        AdamState adam = make_adam(params, 0.01);
        Tensor batch({16, 1, 16});
        Tensor labels({16, 2});
        for (int b = 0; b < 16; ++b) {
            for (int i = 0; i < 16; ++i)
                batch.values[static_cast<std::size_t>(b) * 16 + i] =
                    source.inputs.values[static_cast<std::size_t>(b) * 16 + i];
            labels.values[static_cast<std::size_t>(b) * 2 + source.labels[static_cast<std::size_t>(b)]] = 1.0;
        }
        for (int it = 0; it < 5; ++it) {
            Tape tape;
            m.zero_grad();
            Var logits = m.forward(&tape, batch, true, true);
            LossResult loss = softmax_cross_entropy(&tape, logits, labels);
            backward(tape, loss.loss);
            adam_step(params, adam);
        }
        return m.param_hash();
    };
    CHECK(run(123) == run(123));
    CHECK(run(123) != run(124));
}
