#pragma once

#include <cstdint>
#include <string>

#include "rofdec/dataset.hpp"
#include "rofdec/model.hpp"

namespace rofdec {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int checked = 0;
    int skipped = 0;     // analytic gradient below the small-gradient cutoff
    int kink_skips = 0;  // probes whose +-h evaluation crossed a kink
};

struct GradCheckOptions {
    double h = 1e-5;
    double skip_below = 1e-8;     // |analytic| cutoff
    int samples_per_tensor = 40;  // finite-difference probes per parameter tensor
    std::uint64_t seed = 7;
};

// Central finite differences of the training-path loss against the analytic
// gradients from backward(). Binarized models are checked in surrogate mode,
// where the STE backward is the exact derivative of the forward. A probe
// whose +-h evaluation flips any gate decision (Leaky-ReLU branch, pool
// argmax, STE region) straddles a kink and is discarded, mirroring the
// redraw rule for inputs landing within h of a kink.
GradCheckReport grad_check_model(Model& model, const WindowedDataset& source, int batch_size,
                                 const GradCheckOptions& opt = {});

// Single-layer checks used by the verification report; each builds a tiny
// random scenario for the named layer and returns the same report.
GradCheckReport grad_check_layer(const std::string& layer_name, std::uint64_t seed);
const std::vector<std::string>& grad_check_layer_names();

}  // namespace rofdec
