#include "rofdec/sweeps.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "rofdec/dataset.hpp"
#include "rofdec/errors.hpp"
#include "rofdec/evaluate.hpp"
#include "rofdec/rng.hpp"

namespace rofdec {

namespace {

constexpr std::int64_t kMinBitsPerPoint = 2632;  // 10 / 3.8e-3

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

SweepPowerResult sweep_power(const ModelSpec& spec, const ChannelConfig& ch,
                             const SweepDataConfig& data, const TrainConfig& tcfg) {
    ch.validate();
    if (data.eval_bits_per_point < kMinBitsPerPoint)
        throw ConfigError("eval_bits_per_point must be >= " + std::to_string(kMinBitsPerPoint) +
                          " to resolve the FEC threshold");

    SweepPowerResult res;
    Model model = build_model(spec);
    double center = 0.0;

    if (model.trainable()) {
        WindowedDataset pool = pool_across_powers(ch, data.train_windows_per_power, data.data_seed);
        auto [train_set, val_set] = split(pool, data.train_fraction, mix_seed(data.data_seed, 0x5317ull));
        center = train_set.center;
        res.trace = train(model, train_set, val_set, tcfg);
        res.train_calls = 1;
    }
    res.train_center = center;
    res.param_hash = model.param_hash();

    const std::string name = model_kind_name(spec.kind);
    for (std::size_t pi = 0; pi < ch.power_grid_dbm.size(); ++pi) {
        const double power = ch.power_grid_dbm[pi];
        const WindowedDataset eval = make_eval_set(ch, power, data.eval_bits_per_point,
                                                   mix_seed(data.eval_seed, 0xE000ull + pi), center);
        const std::uint64_t before = model.param_hash();
        const EvalResult r = evaluate_ber(model, eval);
        const std::uint64_t after = model.param_hash();
        if (before != res.param_hash || after != res.param_hash) res.params_stable = false;
        res.curve.rows.push_back({name, ch.name, power, r.errors, r.count, r.ber});
    }
    return res;
}

std::vector<std::pair<std::string, TrainTrace>> sweep_iterations(const std::vector<ModelSpec>& specs,
                                                                 const ChannelConfig& ch,
                                                                 const SweepDataConfig& data,
                                                                 const TrainConfig& tcfg) {
    ch.validate();
    WindowedDataset pool = pool_across_powers(ch, data.train_windows_per_power, data.data_seed);
    auto [train_set, val_set] = split(pool, data.train_fraction, mix_seed(data.data_seed, 0x5317ull));

    std::vector<std::pair<std::string, TrainTrace>> out;
    for (const ModelSpec& spec : specs) {
        Model model = build_model(spec);
        if (!model.trainable())
            throw ConfigError("sweep iterations needs trainable models, got threshold");
        TrainTrace trace = train(model, train_set, val_set, tcfg);
        out.emplace_back(model_kind_name(spec.kind), std::move(trace));
    }
    return out;
}

std::vector<DatasizeRow> sweep_training_size(const ModelSpec& spec, const ChannelConfig& ch,
                                             double power_dbm, const std::vector<std::int64_t>& sizes,
                                             std::int64_t test_windows, const SweepDataConfig& data,
                                             const TrainConfig& tcfg) {
    ch.validate();
    if (sizes.empty()) throw ConfigError("sweep datasize needs at least one size");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1]) throw ConfigError("sweep datasize sizes must be ascending");

    // master pool once; per-size runs use nested prefixes of it
    const std::int64_t largest = sizes.back();
    const Waveform master = simulate_link(ch, largest + 3, power_dbm, mix_seed(data.data_seed, 0xD5ull));
    const WindowedDataset master_ds = window(master);
    const WindowedDataset test_raw =
        make_eval_set(ch, power_dbm, test_windows, mix_seed(data.eval_seed, 0xE5ull), 0.0);

    // fixed budget, no early stop: comparable iteration counts across sizes
    TrainConfig cfg = tcfg;
    cfg.target_accuracy = 2.0;
    cfg.eval_every = std::max(cfg.eval_every, cfg.max_iterations / 4);

    std::vector<DatasizeRow> rows;
    const std::string name = model_kind_name(spec.kind);
    const int width = master_ds.width();
    for (std::int64_t size : sizes) {
        WindowedDataset subset;
        subset.inputs = Tensor({static_cast<int>(size), 1, width},
                               std::vector<double>(master_ds.inputs.values.begin(),
                                                   master_ds.inputs.values.begin() +
                                                       static_cast<std::size_t>(size) * width));
        subset.labels.assign(master_ds.labels.begin(), master_ds.labels.begin() + size);
        subset.decide_index = master_ds.decide_index;
        subset.sps = master_ds.sps;

        double mean = 0.0;
        for (double v : subset.inputs.values) mean += v;
        mean /= static_cast<double>(subset.inputs.numel());
        apply_center(subset, mean);

        WindowedDataset test = test_raw;
        apply_center(test, mean);

        Model model = build_model(spec);
        train(model, subset, test, cfg);
        const EvalResult r = evaluate_ber(model, test);
        rows.push_back({name, size, r.ber});
    }
    return rows;
}

std::int64_t plateau_size(const std::vector<DatasizeRow>& rows, double rel_tol) {
    if (rows.empty()) throw ConfigError("plateau_size on empty rows");
    const double plateau_ber = rows.back().ber;
    const double bound = plateau_ber * (1.0 + rel_tol);
    for (const DatasizeRow& r : rows)
        if (r.ber <= bound) return r.size;
    return rows.back().size;
}

// ------------------------------------------------------------------- CSV

void write_ber_curve_csv(const std::string& path, const std::vector<BerRow>& rows) {
    std::vector<BerRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const BerRow& a, const BerRow& b) {
        if (a.model != b.model) return a.model < b.model;
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.power_dbm < b.power_dbm;
    });
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "model,distance,power_dbm,errors,bits,ber\n";
    for (const BerRow& r : sorted)
        out << r.model << ',' << r.distance << ',' << fmt(r.power_dbm) << ',' << r.errors << ','
            << r.bits << ',' << fmt(r.ber) << '\n';
    if (!out) throw ConfigError("short write: " + path);
}

void write_train_trace_csv(const std::string& path,
                           const std::vector<std::pair<std::string, TrainTrace>>& traces) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "model,iteration,loss,accuracy\n";
    for (const auto& [model, trace] : traces)
        for (const TraceRow& r : trace.rows)
            out << model << ',' << r.iteration << ',' << fmt(r.train_loss) << ','
                << fmt(r.test_accuracy) << '\n';
    if (!out) throw ConfigError("short write: " + path);
}

void write_datasize_csv(const std::string& path, const std::vector<DatasizeRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "model,size,ber\n";
    for (const DatasizeRow& r : rows) out << r.model << ',' << r.size << ',' << fmt(r.ber) << '\n';
    if (!out) throw ConfigError("short write: " + path);
}

}  // namespace rofdec
