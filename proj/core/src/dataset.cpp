#include "rofdec/dataset.hpp"

#include <cstring>
#include <fstream>

#include "rofdec/errors.hpp"
#include "rofdec/rng.hpp"

namespace rofdec {

namespace {

constexpr int kSymbolsPerWindow = 4;
constexpr std::uint32_t kMagic = 0x31574652u;  // "RFW1" little-endian
constexpr std::uint32_t kVersion = 1u;

WindowedDataset take_windows(const WindowedDataset& ds, const std::vector<std::int64_t>& idx) {
    const int width = ds.width();
    WindowedDataset out;
    out.inputs = Tensor({static_cast<int>(idx.size()), 1, width});
    out.labels.resize(idx.size());
    out.decide_index = ds.decide_index;
    out.center = ds.center;
    out.sps = ds.sps;
    out.distance = ds.distance;
    out.seed = ds.seed;
    if (!ds.window_power_dbm.empty()) out.window_power_dbm.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::int64_t s = idx[r];
        std::memcpy(out.inputs.values.data() + static_cast<std::size_t>(r) * width,
                    ds.inputs.values.data() + static_cast<std::size_t>(s) * width,
                    sizeof(double) * static_cast<std::size_t>(width));
        out.labels[r] = ds.labels[static_cast<std::size_t>(s)];
        if (!ds.window_power_dbm.empty())
            out.window_power_dbm[r] = ds.window_power_dbm[static_cast<std::size_t>(s)];
    }
    return out;
}

}  // namespace

WindowedDataset window(const Waveform& w, int decide_index) {
    if (decide_index < 0 || decide_index >= kSymbolsPerWindow)
        throw DataError("decide_index must be in [0,3], got " + std::to_string(decide_index));
    if (w.symbol_count < kSymbolsPerWindow)
        throw DataError("waveform too short to window: " + std::to_string(w.symbol_count) + " symbols");
    const int width = kSymbolsPerWindow * w.sps;
    const std::int64_t n = w.symbol_count - (kSymbolsPerWindow - 1);

    WindowedDataset ds;
    ds.inputs = Tensor({static_cast<int>(n), 1, width});
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.decide_index = decide_index;
    ds.sps = w.sps;
    for (std::int64_t k = 0; k < n; ++k) {
        const double* src = w.samples.data() + static_cast<std::size_t>(k) * w.sps;
        std::memcpy(ds.inputs.values.data() + static_cast<std::size_t>(k) * width, src,
                    sizeof(double) * static_cast<std::size_t>(width));
        ds.labels[static_cast<std::size_t>(k)] = w.origin_bits[static_cast<std::size_t>(k + decide_index)];
    }
    return ds;
}

void apply_center(WindowedDataset& ds, double center) {
    if (center == 0.0) return;
    for (double& v : ds.inputs.values) v -= center;
    ds.center += center;
}

std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& ds, double train_fraction,
                                                  std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("train_fraction must be in (0,1), got " + std::to_string(train_fraction));
    const std::int64_t n = ds.size();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(seed, 0x59711ull));
    rng.shuffle(idx);

    const std::int64_t n_train = static_cast<std::int64_t>(train_fraction * static_cast<double>(n));
    std::vector<std::int64_t> tr(idx.begin(), idx.begin() + n_train);
    std::vector<std::int64_t> te(idx.begin() + n_train, idx.end());
    WindowedDataset train = take_windows(ds, tr);
    WindowedDataset test = take_windows(ds, te);

    double mean = 0.0;
    for (double v : train.inputs.values) mean += v;
    mean /= static_cast<double>(train.inputs.numel());
    apply_center(train, mean);
    apply_center(test, mean);
    return {std::move(train), std::move(test)};
}

WindowedDataset pool_across_powers(const ChannelConfig& cfg, std::int64_t n_per_power,
                                   std::uint64_t seed, int decide_index) {
    if (n_per_power < 1) throw DataError("pool_across_powers needs n_per_power >= 1");
    const std::int64_t n_powers = static_cast<std::int64_t>(cfg.power_grid_dbm.size());
    const int width = kSymbolsPerWindow * cfg.sps;
    const std::int64_t total = n_per_power * n_powers;

    WindowedDataset pool;
    pool.inputs = Tensor({static_cast<int>(total), 1, width});
    pool.labels.resize(static_cast<std::size_t>(total));
    pool.decide_index = decide_index;
    pool.sps = cfg.sps;
    pool.distance = cfg.name;
    pool.seed = seed;
    pool.window_power_dbm.resize(static_cast<std::size_t>(total));

    std::int64_t row = 0;
    for (std::int64_t pi = 0; pi < n_powers; ++pi) {
        const double power = cfg.power_grid_dbm[static_cast<std::size_t>(pi)];
        const Waveform w = simulate_link(cfg, n_per_power + (kSymbolsPerWindow - 1), power,
                                         mix_seed(seed, static_cast<std::uint64_t>(pi)));
        const WindowedDataset ds = window(w, decide_index);
        for (std::int64_t k = 0; k < n_per_power; ++k, ++row) {
            std::memcpy(pool.inputs.values.data() + static_cast<std::size_t>(row) * width,
                        ds.inputs.values.data() + static_cast<std::size_t>(k) * width,
                        sizeof(double) * static_cast<std::size_t>(width));
            pool.labels[static_cast<std::size_t>(row)] = ds.labels[static_cast<std::size_t>(k)];
            pool.window_power_dbm[static_cast<std::size_t>(row)] = power;
        }
    }

    std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(seed, 0x90001ull));
    rng.shuffle(idx);
    return take_windows(pool, idx);
}

WindowedDataset make_eval_set(const ChannelConfig& cfg, double power_dbm, std::int64_t n_windows,
                              std::uint64_t seed, double center, int decide_index) {
    const Waveform w =
        simulate_link(cfg, n_windows + (kSymbolsPerWindow - 1), power_dbm, seed);
    WindowedDataset ds = window(w, decide_index);
    ds.distance = cfg.name;
    ds.seed = seed;
    apply_center(ds, center);
    return ds;
}

void save_dataset(const WindowedDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open dataset file for writing: " + path);
    const std::uint64_t n = static_cast<std::uint64_t>(ds.size());
    const std::uint32_t width = static_cast<std::uint32_t>(ds.width());
    const std::uint32_t decide = static_cast<std::uint32_t>(ds.decide_index);
    out.write(reinterpret_cast<const char*>(&kMagic), 4);
    out.write(reinterpret_cast<const char*>(&kVersion), 4);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&width), 4);
    out.write(reinterpret_cast<const char*>(&decide), 4);
    out.write(reinterpret_cast<const char*>(&ds.center), 8);
    std::vector<float> row(width);
    for (std::uint64_t r = 0; r < n; ++r) {
        const double* src = ds.inputs.values.data() + r * width;
        for (std::uint32_t i = 0; i < width; ++i) row[i] = static_cast<float>(src[i]);
        out.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * width);
    }
    out.write(reinterpret_cast<const char*>(ds.labels.data()), static_cast<std::streamsize>(n));
    if (!out) throw ConfigError("short write to dataset file: " + path);
}

WindowedDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open dataset file: " + path);
    std::uint32_t magic = 0, version = 0, width = 0, decide = 0;
    std::uint64_t n = 0;
    double center = 0.0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&width), 4);
    in.read(reinterpret_cast<char*>(&decide), 4);
    in.read(reinterpret_cast<char*>(&center), 8);
    if (!in || magic != kMagic) throw DataError("not a dataset file (bad magic): " + path);
    if (version != kVersion)
        throw DataError("unsupported dataset file version " + std::to_string(version) + ": " + path);

    WindowedDataset ds;
    ds.inputs = Tensor({static_cast<int>(n), 1, static_cast<int>(width)});
    ds.labels.resize(n);
    ds.decide_index = static_cast<int>(decide);
    ds.center = center;
    std::vector<float> row(width);
    for (std::uint64_t r = 0; r < n; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), sizeof(float) * width);
        double* dst = ds.inputs.values.data() + r * width;
        for (std::uint32_t i = 0; i < width; ++i) dst[i] = static_cast<double>(row[i]);
    }
    in.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(n));
    if (!in) throw DataError("truncated dataset file: " + path);
    return ds;
}

}  // namespace rofdec
