#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "rofdec/errors.hpp"
#include "rofdec/linksim.hpp"
#include "rofdec/stats.hpp"

using namespace rofdec;

namespace {

ChannelConfig clean_channel() {
    ChannelConfig c = channel_preset("d10km");
    c.name = "clean";
    c.isi_taps = {1.0};
    c.nl_a3 = 0.0;
    return c;
}

// threshold detection at the decision instants
std::int64_t count_bit_errors(const Waveform& w) {
    std::int64_t errors = 0;
    for (std::int64_t k = 0; k < w.symbol_count; ++k) {
        const int bit = w.samples[static_cast<std::size_t>(k * w.sps)] >= 0.0 ? 1 : 0;
        if (bit != static_cast<int>(w.origin_bits[static_cast<std::size_t>(k)])) ++errors;
    }
    return errors;
}

}  // namespace

TEST_CASE("random bits are deterministic per seed and unbiased") {
    const auto a = random_bits(4096, 7);
    const auto b = random_bits(4096, 7);
    CHECK(a == b);
    const auto c = random_bits(4096, 8);
    CHECK(a != c);

    const auto big = random_bits(1000000, 99);
    double ones = 0;
    for (auto bit : big) ones += bit;
    const double frac = ones / 1e6;
    CHECK(frac > 0.498);  // binomial 3-sigma is ~0.0015
    CHECK(frac < 0.502);
}

TEST_CASE("pam2 mapping and round trip") {
    const std::vector<std::uint8_t> bits{0, 1, 1, 0};
    const auto sym = pam2_modulate(bits);
    CHECK(sym == std::vector<double>{-1, 1, 1, -1});
    for (std::size_t i = 0; i < bits.size(); ++i)
        CHECK(static_cast<int>(sym[i] >= 0.0) == static_cast<int>(bits[i]));

    const auto zeros = pam2_modulate(std::vector<std::uint8_t>(5, 0));
    for (double s : zeros) CHECK(s == -1.0);
}

TEST_CASE("trivial single-tap pulse: zero-stuffed symbols pass through") {
    const std::vector<std::uint8_t> bits{1, 0, 1};
    const auto sym = pam2_modulate(bits);
    const std::vector<double> pulse{1.0};
    Waveform w = upsample_shape(sym, bits, 4, pulse);
    REQUIRE(w.samples.size() == 12);
    for (int k = 0; k < 3; ++k) {
        CHECK(w.samples[static_cast<std::size_t>(4 * k)] == sym[static_cast<std::size_t>(k)]);
        for (int j = 1; j < 4; ++j) CHECK(w.samples[static_cast<std::size_t>(4 * k + j)] == 0.0);
    }
}

TEST_CASE("single symbol reproduces the pulse (impulse response)") {
    const auto pulse = raised_cosine_pulse(0.5, 8, 4);
    CHECK(pulse.size() == 33);
    CHECK(pulse[16] == doctest::Approx(1.0));  // unit peak at center
    const std::vector<std::uint8_t> bits{0, 0, 0, 0, 1, 0, 0, 0, 0};
    std::vector<double> impulse(bits.size(), 0.0);
    impulse[4] = 1.0;  // lone +1 among zeros
    Waveform w = upsample_shape(impulse, bits, 4, pulse);
    for (int i = -16; i <= 16; ++i)
        CHECK(w.samples[static_cast<std::size_t>(16 + i)] ==
              doctest::Approx(pulse[static_cast<std::size_t>(i + 16)]).epsilon(1e-12));
}

TEST_CASE("raised cosine is Nyquist: clean chain decision samples equal symbols") {
    const auto bits = random_bits(512, 3);
    const auto sym = pam2_modulate(bits);
    const auto pulse = raised_cosine_pulse(0.5, 8, 4);
    Waveform w = upsample_shape(sym, bits, 4, pulse);
    for (std::int64_t k = 0; k < w.symbol_count; ++k)
        CHECK(w.samples[static_cast<std::size_t>(4 * k)] ==
              doctest::Approx(sym[static_cast<std::size_t>(k)]).epsilon(1e-9));
}

TEST_CASE("alignment: correlation with the symbol grid peaks at lag zero") {
    const auto bits = random_bits(2048, 5);
    const auto sym = pam2_modulate(bits);
    const auto pulse = raised_cosine_pulse(0.5, 8, 4);
    Waveform w = upsample_shape(sym, bits, 4, pulse);
    double best = -std::numeric_limits<double>::infinity();
    int best_lag = -99;
    for (int lag = -3; lag <= 3; ++lag) {
        double corr = 0.0;
        for (std::int64_t k = 8; k + 8 < w.symbol_count; ++k)
            corr += sym[static_cast<std::size_t>(k)] *
                    w.samples[static_cast<std::size_t>(4 * k + lag)];
        if (corr > best) {
            best = corr;
            best_lag = lag;
        }
    }
    CHECK(best_lag == 0);
}

TEST_CASE("isi: delta taps are the identity") {
    const auto bits = random_bits(64, 9);
    const auto sym = pam2_modulate(bits);
    Waveform w = upsample_shape(sym, bits, 4, raised_cosine_pulse(0.5, 8, 4));
    const auto before = w.samples;
    apply_isi(w, {1.0});
    CHECK(w.samples == before);
}

TEST_CASE("isi: 3-tap smoother matches hand convolution on a rectangular waveform") {
    // alternating +-1 held 4 samples each
    Waveform w;
    w.sps = 4;
    w.symbol_count = 4;
    w.origin_bits = {1, 0, 1, 0};
    w.samples = {1, 1, 1, 1, -1, -1, -1, -1, 1, 1, 1, 1, -1, -1, -1, -1};
    apply_isi(w, {0.25, 0.5, 0.25});
    // run boundaries attenuate toward 0, mid-run samples keep full swing
    CHECK(w.samples[2] == doctest::Approx(1.0));
    CHECK(w.samples[3] == doctest::Approx(0.5));   // 0.25*1 + 0.5*1 + 0.25*(-1)
    CHECK(w.samples[4] == doctest::Approx(-0.5));  // 0.25*1 + 0.5*(-1) + 0.25*(-1)
    CHECK(w.samples[5] == doctest::Approx(-1.0));
}

TEST_CASE("nonlinearity: linear case, arithmetic case, odd symmetry") {
    Waveform w;
    w.sps = 4;
    w.symbol_count = 1;
    w.origin_bits = {1};
    w.samples = {0.5, -0.5, 1.0, 2.0};
    Waveform lin = w;
    apply_nonlinearity(lin, 2.0, 0.0);
    CHECK(lin.samples == std::vector<double>{1.0, -1.0, 2.0, 4.0});

    Waveform cub = w;
    apply_nonlinearity(cub, 1.0, -0.1);
    CHECK(cub.samples[2] == doctest::Approx(0.9));

    Waveform pos = w, neg = w;
    for (auto& s : neg.samples) s = -s;
    apply_nonlinearity(pos, 1.0, -0.15);
    apply_nonlinearity(neg, 1.0, -0.15);
    for (std::size_t i = 0; i < pos.samples.size(); ++i)
        CHECK(pos.samples[i] == doctest::Approx(-neg.samples[i]).epsilon(1e-15));
}

TEST_CASE("power to snr is affine with the calibrated slope") {
    const Calibration cal{2.0, -20.0};
    CHECK(power_to_snr(-18.0, cal) == doctest::Approx(4.0));
    CHECK(power_to_snr(-17.0, cal) - power_to_snr(-18.0, cal) == doctest::Approx(2.0));
}

TEST_CASE("awgn: infinite snr leaves the waveform unchanged") {
    const auto bits = random_bits(64, 13);
    const auto sym = pam2_modulate(bits);
    Waveform w = upsample_shape(sym, bits, 4, raised_cosine_pulse(0.5, 8, 4));
    const auto before = w.samples;
    apply_awgn(w, std::numeric_limits<double>::infinity(), 1);
    CHECK(w.samples == before);
}

TEST_CASE("awgn: empirical noise variance within 2% of commanded at 1e5 samples") {
    Waveform w;
    w.sps = 4;
    w.symbol_count = 25000;
    w.origin_bits.assign(25000, 1);
    w.samples.assign(100000, 1.0);  // unit-power signal
    const double snr_db = 6.0;
    Waveform noisy = w;
    apply_awgn(noisy, snr_db, 77);
    double var = 0.0;
    for (std::size_t i = 0; i < noisy.samples.size(); ++i) {
        const double n = noisy.samples[i] - w.samples[i];
        var += n * n;
    }
    var /= static_cast<double>(noisy.samples.size());
    const double want = 1.0 / std::pow(10.0, snr_db / 10.0);
    CHECK(var == doctest::Approx(want).epsilon(0.02));
}

TEST_CASE("clean chain is bit transparent end to end") {
    ChannelConfig c = clean_channel();
    c.cal.offset_db = -1e9;  // any grid power maps to astronomically high snr
    Waveform w = simulate_link(c, 2000, -17.0, 5);
    CHECK(count_bit_errors(w) == 0);
}

TEST_CASE("simulate link is bit-exactly deterministic per seed") {
    const ChannelConfig& c = channel_preset("d15km");
    Waveform a = simulate_link(c, 512, -17.0, 42);
    Waveform b = simulate_link(c, 512, -17.0, 42);
    CHECK(a.samples == b.samples);
    CHECK(a.origin_bits == b.origin_bits);
    Waveform other = simulate_link(c, 512, -17.0, 43);
    CHECK(a.samples != other.samples);
}

TEST_CASE("noise-free eye ordering d10km > d15km > d20km") {
    const double e10 = eye_opening(channel_preset("d10km"), 10000, 5);
    const double e15 = eye_opening(channel_preset("d15km"), 10000, 5);
    const double e20 = eye_opening(channel_preset("d20km"), 10000, 5);
    CHECK(e10 > e15);
    CHECK(e15 > e20);
}

TEST_CASE("threshold BER at equal power: d15km strictly worse than d10km") {
    const std::int64_t n = 100000;
    const double power = -17.0;
    Waveform w10 = simulate_link(channel_preset("d10km"), n, power, 21);
    Waveform w15 = simulate_link(channel_preset("d15km"), n, power, 21);
    CHECK(count_bit_errors(w15) > count_bit_errors(w10));
}

TEST_CASE("threshold BER is monotone non-increasing in power (Wilson overlap)") {
    const ChannelConfig& c = channel_preset("d10km");
    const std::int64_t n = 100000;
    Interval prev{1.0, 1.0};
    bool first = true;
    for (std::size_t pi = 0; pi < c.power_grid_dbm.size(); pi += 2) {
        Waveform w = simulate_link(c, n, c.power_grid_dbm[pi], 31 + pi);
        const std::int64_t errors = count_bit_errors(w);
        const Interval iv = wilson_interval(errors, n);
        if (!first) CHECK(iv.lo <= prev.hi);  // higher power must not sit above lower power
        prev = iv;
        first = false;
    }
}

TEST_CASE("channel config invariants are enforced") {
    ChannelConfig c = channel_preset("d10km");
    c.isi_taps = {0.5, 0.5};  // even length
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = channel_preset("d10km");
    c.isi_taps = {0.3, 0.3, 0.3};  // sum != 1
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = channel_preset("d10km");
    c.power_grid_dbm = {-19.0, -18.0, -17.0};  // span < 3.5
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = channel_preset("d10km");
    c.sps = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(channel_preset("d25km"), ConfigError);
}

TEST_CASE("presets have unit-sum taps and a 3.5 dB grid span") {
    for (const std::string& name : channel_preset_names()) {
        const ChannelConfig& c = channel_preset(name);
        double sum = 0.0;
        for (double t : c.isi_taps) sum += t;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(c.power_grid_dbm.back() - c.power_grid_dbm.front() >= 3.5 - 1e-9);
        CHECK(c.sps == 4);
    }
}

TEST_CASE("channel config file round trip") {
    ConfigFile f;
    channel_to_config(channel_preset("d15km"), f);
    const ChannelConfig back = channel_from_config(f, "d15km");
    CHECK(back.isi_taps == channel_preset("d15km").isi_taps);
    CHECK(back.cal.offset_db == channel_preset("d15km").cal.offset_db);
    CHECK(back.power_grid_dbm == channel_preset("d15km").power_grid_dbm);
}
