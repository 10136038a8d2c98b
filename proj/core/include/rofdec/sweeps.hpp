#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rofdec/linksim.hpp"
#include "rofdec/model.hpp"
#include "rofdec/train.hpp"

namespace rofdec {

struct BerRow {
    std::string model;
    std::string distance;
    double power_dbm = 0.0;
    std::int64_t errors = 0;
    std::int64_t bits = 0;
    double ber = 0.0;
};

struct BerCurve {
    std::vector<BerRow> rows;
};

struct DatasizeRow {
    std::string model;
    std::int64_t size = 0;
    double ber = 0.0;
};

// Data-generation knobs shared by the sweeps.
struct SweepDataConfig {
    std::int64_t train_windows_per_power = 12500;
    std::int64_t eval_bits_per_point = 100000;  // >= 2632 so the FEC threshold resolves
    double train_fraction = 0.8;
    std::uint64_t data_seed = 11;
    std::uint64_t eval_seed = 77;  // must not collide with data_seed streams
};

struct SweepPowerResult {
    BerCurve curve;
    TrainTrace trace;
    int train_calls = 0;        // exactly one for trainable models
    bool params_stable = true;  // hash unchanged around every evaluation
    std::uint64_t param_hash = 0;
    double train_center = 0.0;
};

// Trains once on the power-pooled training set, then evaluates per-power
// test sets without retraining.
SweepPowerResult sweep_power(const ModelSpec& spec, const ChannelConfig& ch,
                             const SweepDataConfig& data, const TrainConfig& tcfg);

// One shared pooled dataset, fresh model per spec, identical TrainConfig.
std::vector<std::pair<std::string, TrainTrace>> sweep_iterations(const std::vector<ModelSpec>& specs,
                                                                 const ChannelConfig& ch,
                                                                 const SweepDataConfig& data,
                                                                 const TrainConfig& tcfg);

// Fresh model per training-set size at one (distance, power) cell; identical
// fixed test set; fixed iteration budget (no early stop) for comparability.
std::vector<DatasizeRow> sweep_training_size(const ModelSpec& spec, const ChannelConfig& ch,
                                             double power_dbm, const std::vector<std::int64_t>& sizes,
                                             std::int64_t test_windows, const SweepDataConfig& data,
                                             const TrainConfig& tcfg);

// Smallest size whose BER is within rel_tol of the largest-size BER.
std::int64_t plateau_size(const std::vector<DatasizeRow>& rows, double rel_tol = 0.10);

// CSV emission, headers and row order fixed for byte-stable reruns.
void write_ber_curve_csv(const std::string& path, const std::vector<BerRow>& rows);
void write_train_trace_csv(const std::string& path,
                           const std::vector<std::pair<std::string, TrainTrace>>& traces);
void write_datasize_csv(const std::string& path, const std::vector<DatasizeRow>& rows);

}  // namespace rofdec
