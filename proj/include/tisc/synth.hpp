#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tisc/dataset.hpp"
#include "tisc/rng.hpp"

namespace tisc {

enum class NoiseKind { white, pink };
enum class Alignment { grid_aligned, uniform_random };

inline const char* to_string(NoiseKind k) { return k == NoiseKind::white ? "white" : "pink"; }
inline const char* to_string(Alignment a) {
    return a == Alignment::grid_aligned ? "grid-aligned" : "random";
}

// Two-class fixture: class 0 is noise, class 1 is noise plus one Gabor-like
// burst whose support is a window of 2^burst_scale interleaved samples. In
// grid-aligned mode the burst start snaps to a multiple of its window length,
// matching the network's tiling; in random mode it lands anywhere.
struct SynthSpec {
    std::size_t n_per_class = 100;
    std::size_t seg_len = 1024;  // per channel
    std::size_t n_channels = 1;
    NoiseKind noise = NoiseKind::white;
    int burst_scale = 7;
    double amplitude = 3.0;  // peak, in units of the noise standard deviation
    Alignment alignment = Alignment::grid_aligned;
    float sample_rate = 256.0f;
    std::uint64_t seed = 0;

    std::size_t interleaved_length() const { return seg_len * n_channels; }

    void validate() const {
        if (n_per_class == 0) throw config_error("synth: n_per_class must be positive");
        if (!is_pow2(n_channels)) {
            throw config_error("synth: channel count must be a power of two");
        }
        if (!is_pow2(interleaved_length())) {
            throw config_error("synth: seg_len*channels must be a power of two");
        }
        if (burst_scale < 1 ||
            (std::size_t(1) << burst_scale) > interleaved_length()) {
            throw config_error("synth: burst window 2^" + std::to_string(burst_scale) +
                               " does not fit in " + std::to_string(interleaved_length()) +
                               " interleaved samples");
        }
        if (amplitude < 0.0) throw config_error("synth: amplitude must be >= 0");
    }
};

namespace detail {

// Voss-McCartney pink noise: one held uniform generator per octave row, the
// row updated at sample n is the count of trailing zeros of n. Output is
// standardized to unit variance per channel afterwards.
inline void fill_pink(Rng& rng, std::vector<double>& out) {
    const int rows = std::max(1, ilog2(std::max<std::size_t>(out.size(), 2)));
    std::vector<double> held(static_cast<std::size_t>(rows), 0.0);
    for (double& h : held) h = rng.uniform(-1.0, 1.0);
    double white = 0.0;
    for (std::size_t n = 0; n < out.size(); ++n) {
        if (n > 0) {
            const int row = std::countr_zero(n);
            if (row < rows) held[std::size_t(row)] = rng.uniform(-1.0, 1.0);
        }
        white = rng.uniform(-1.0, 1.0);
        double sum = white;
        for (double h : held) sum += h;
        out[n] = sum;
    }
}

inline void standardize(std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= double(v.size());
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
        for (double& x : v) x = (x - mean) / sd;
    }
}

// Gaussian-envelope cosine spanning the whole window. The carrier runs three
// cycles per window, deliberately incommensurate with the dyadic sub-windows:
// successive half- and quarter-window chunks then sit at rotating carrier
// phases, so no single shorter kernel reuses one cycle across offsets.
inline std::vector<double> burst_shape(int scale, double amplitude) {
    const std::size_t w = std::size_t(1) << scale;
    const double center = (double(w) - 1.0) / 2.0;
    const double env_sigma = double(w) / 4.0;
    std::vector<double> b(w);
    for (std::size_t k = 0; k < w; ++k) {
        const double u = (double(k) - center) / env_sigma;
        const double phase = 2.0 * std::numbers::pi * 3.0 * (double(k) - center) / double(w);
        b[k] = amplitude * std::exp(-0.5 * u * u) * std::cos(phase);
    }
    return b;
}

}  // namespace detail

inline SegmentDataset synthesize(const SynthSpec& spec) {
    spec.validate();
    SegmentDataset ds;
    ds.n_segments = 2 * spec.n_per_class;
    ds.n_channels = spec.n_channels;
    ds.seg_len = spec.seg_len;
    ds.n_classes = 2;
    ds.sample_rate = spec.sample_rate;
    ds.labels.resize(ds.n_segments);
    ds.data.resize(ds.n_segments * ds.n_channels * ds.seg_len);

    Rng rng(mix_seed(spec.seed, 0x5D17A));
    const std::vector<double> burst = detail::burst_shape(spec.burst_scale, spec.amplitude);
    const std::size_t L = spec.interleaved_length();
    const std::size_t w = std::size_t(1) << spec.burst_scale;
    std::vector<double> channel(spec.seg_len);

    for (std::size_t s = 0; s < ds.n_segments; ++s) {
        const bool positive = s >= spec.n_per_class;
        ds.labels[s] = positive ? 1 : 0;
        std::vector<std::vector<double>> chans(spec.n_channels);
        for (std::size_t c = 0; c < spec.n_channels; ++c) {
            channel.resize(spec.seg_len);
            if (spec.noise == NoiseKind::white) {
                for (double& v : channel) v = rng.normal();
            } else {
                detail::fill_pink(rng, channel);
                detail::standardize(channel);
            }
            chans[c] = channel;
        }
        if (positive) {
            const std::size_t start = spec.alignment == Alignment::grid_aligned
                                          ? rng.below(L / w) * w
                                          : rng.below(L - w + 1);
            // burst lives in interleaved coordinates; map each tap back to
            // its (channel, time) slot
            for (std::size_t k = 0; k < w; ++k) {
                const std::size_t n = start + k;
                chans[n % spec.n_channels][n / spec.n_channels] += burst[k];
            }
        }
        for (std::size_t c = 0; c < spec.n_channels; ++c) {
            float* dst = ds.data.data() + (s * ds.n_channels + c) * ds.seg_len;
            for (std::size_t t = 0; t < ds.seg_len; ++t) dst[t] = float(chans[c][t]);
        }
    }
    ds.validate();
    return ds;
}

}  // namespace tisc
