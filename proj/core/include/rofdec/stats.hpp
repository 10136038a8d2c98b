#pragma once

#include <cstdint>
#include <string>

namespace rofdec {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

// Wilson score interval for a binomial proportion (default z = 1.96, 95%).
Interval wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.96);

// Gaussian tail probability Q(x) = P(N(0,1) > x).
double q_function(double x);

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex_u64(std::uint64_t v);

}  // namespace rofdec
