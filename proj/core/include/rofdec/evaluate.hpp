#pragma once

#include <cstdint>

#include "rofdec/dataset.hpp"
#include "rofdec/model.hpp"

namespace rofdec {

struct EvalResult {
    std::int64_t errors = 0;
    std::int64_t count = 0;
    double ber = 0.0;
};

enum class EvalPrecision { F64, F32 };

// Argmax decision per window against its label; exact integer counting.
// Binarized layers always run on the packed XNOR/popcount kernels, which
// are bit-equal to the training-path forward. Threshold models fall back to
// the hard-decision rule. Model parameters are never touched.
EvalResult evaluate_ber(const Model& m, const WindowedDataset& ds,
                        EvalPrecision precision = EvalPrecision::F64);

// Sign of the decision-instant sample, compensated for dataset centering.
EvalResult hard_decision_baseline(const WindowedDataset& ds);

// Infer-mode logits for a batch [B, 1, 16] (double precision path).
Tensor infer_logits(const Model& m, const Tensor& batch);

}  // namespace rofdec
