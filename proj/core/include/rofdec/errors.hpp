#pragma once

#include <stdexcept>
#include <string>

namespace rofdec {

// Shape/axis mismatches between tensors or layer specs.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};

// Malformed payloads: non-one-hot labels, degenerate batches, bad files.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

// Tape/optimizer misuse: backward without forward, missing gradients.
struct StateError : std::runtime_error {
    explicit StateError(const std::string& m) : std::runtime_error(m) {}
};

// NaN/Inf where finite values are required, training divergence.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

// Bad config files, unknown presets, unusable CLI arguments.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace rofdec
