#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rofdec/config.hpp"

namespace rofdec {

// Affine received-power -> SNR map: snr_db = slope * (power_dbm - offset).
struct Calibration {
    double slope_db_per_db = 1.0;
    double offset_db = 0.0;
};

// Baseband surrogate of one fiber distance: FIR intersymbol interference,
// memoryless cubic nonlinearity y = a1*x + a3*x^3, and power-calibrated
// additive white Gaussian noise at 4 samples per symbol.
struct ChannelConfig {
    std::string name;
    std::vector<double> isi_taps;  // odd length, unit DC gain
    double nl_a1 = 1.0;
    double nl_a3 = 0.0;
    int sps = 4;
    std::vector<double> power_grid_dbm;  // ascending, spans >= 3.5 dB
    Calibration cal;
    double pulse_rolloff = 0.5;
    int pulse_span_symbols = 8;

    void validate() const;  // throws ConfigError on any violated invariant
};

struct Waveform {
    std::vector<double> samples;
    int sps = 4;
    std::int64_t symbol_count = 0;
    std::vector<std::uint8_t> origin_bits;
};

// Seeded uniform random bits (no PRBS structure).
std::vector<std::uint8_t> random_bits(std::int64_t n, std::uint64_t seed);

// bit 0 -> -1, bit 1 -> +1
std::vector<double> pam2_modulate(const std::vector<std::uint8_t>& bits);

// Unit-peak raised-cosine pulse sampled at sps, spanning span_symbols.
std::vector<double> raised_cosine_pulse(double rolloff, int span_symbols, int sps);

// Zero-stuffing upsampler + pulse-shaping filter, group delay compensated so
// samples[sps*k] is the decision instant of symbol k.
Waveform upsample_shape(const std::vector<double>& symbols, const std::vector<std::uint8_t>& bits,
                        int sps, const std::vector<double>& pulse);

// Linear FIR convolution, group delay (odd tap count) compensated in place.
void apply_isi(Waveform& w, const std::vector<double>& taps);

void apply_nonlinearity(Waveform& w, double a1, double a3);

double power_to_snr(double power_dbm, const Calibration& cal);

// White Gaussian noise with variance measured_signal_power / 10^(snr/10);
// +inf snr leaves the waveform untouched.
void apply_awgn(Waveform& w, double snr_db, std::uint64_t seed);

// modulate -> upsample/shape -> nonlinearity -> ISI -> AWGN
Waveform simulate_link(const ChannelConfig& cfg, std::int64_t n_symbols, double power_dbm,
                       std::uint64_t seed);

// Worst-case signed margin a_k * s[sps*k] over a noise-free run; smaller
// means a more closed eye.
double eye_opening(const ChannelConfig& cfg, std::int64_t n_symbols, std::uint64_t seed);

// Shipped distance presets: d10km, d15km, d20km.
const ChannelConfig& channel_preset(const std::string& name);
std::vector<std::string> channel_preset_names();

// Config-file round trip for presets ([channel.<name>] sections).
ChannelConfig channel_from_config(const ConfigFile& cfg, const std::string& name);
void channel_to_config(const ChannelConfig& ch, ConfigFile& cfg);

}  // namespace rofdec
