#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rofdec/linksim.hpp"
#include "rofdec/tensor.hpp"

namespace rofdec {

// Labeled decision windows: inputs [N, 1, 16] (4 symbols x 4 samples, one
// symbol stride), label = origin bit of the symbol at decide_index.
struct WindowedDataset {
    Tensor inputs;
    std::vector<std::uint8_t> labels;
    int decide_index = 2;
    double center = 0.0;  // offset already subtracted from inputs
    int sps = 4;
    // provenance
    std::string distance;
    std::uint64_t seed = 0;
    std::vector<double> window_power_dbm;  // per window, empty unless pooled

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    int width() const { return inputs.shape.size() == 3 ? inputs.dim(2) : 0; }
};

WindowedDataset window(const Waveform& w, int decide_index = 2);

// Subtract `center` from every input (records it); applying twice stacks.
void apply_center(WindowedDataset& ds, double center);

// Seeded shuffle, disjoint split, then centering: the train-set mean is
// computed and subtracted from both halves.
std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& ds, double train_fraction,
                                                  std::uint64_t seed);

// Equal window counts simulated at every grid power, concatenated and
// shuffled; per-window provenance power kept. Not yet centered.
WindowedDataset pool_across_powers(const ChannelConfig& cfg, std::int64_t n_per_power,
                                   std::uint64_t seed, int decide_index = 2);

// Windows at a single power, centered with a caller-provided offset
// (typically the training-set center).
WindowedDataset make_eval_set(const ChannelConfig& cfg, double power_dbm, std::int64_t n_windows,
                              std::uint64_t seed, double center, int decide_index = 2);

// Flat binary file: little-endian header (magic 'RFW1', version, N, width,
// decide_index, center) + float32 inputs + uint8 labels.
void save_dataset(const WindowedDataset& ds, const std::string& path);
WindowedDataset load_dataset(const std::string& path);

}  // namespace rofdec
