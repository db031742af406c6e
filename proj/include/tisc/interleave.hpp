#pragma once

#include <span>
#include <string>
#include <vector>

#include "tisc/common.hpp"

namespace tisc {

// Merges C equal-length channels sample-by-sample: out[n*C + c] = channel_c[n].
// One kernel applied to the interleaved vector then sees time-aligned data
// from every channel at once.
inline std::vector<double> interleave(const std::vector<std::vector<double>>& channels) {
    if (channels.empty()) throw data_error("interleave: no channels given");
    const std::size_t c = channels.size();
    if (!is_pow2(c)) {
        throw data_error("interleave: channel count " + std::to_string(c) +
                         " is not a power of two; pad with all-zero dummy channels "
                         "up to the next power of two");
    }
    const std::size_t n = channels[0].size();
    for (const auto& ch : channels) {
        if (ch.size() != n) throw data_error("interleave: channels have unequal lengths");
    }
    std::vector<double> out(c * n);
    for (std::size_t ci = 0; ci < c; ++ci) {
        const auto& ch = channels[ci];
        for (std::size_t t = 0; t < n; ++t) out[t * c + ci] = ch[t];
    }
    return out;
}

inline std::vector<std::vector<double>> deinterleave(std::span<const double> x,
                                                     std::size_t n_channels) {
    if (n_channels == 0 || x.size() % n_channels != 0) {
        throw data_error("deinterleave: length " + std::to_string(x.size()) +
                         " is not a multiple of channel count " + std::to_string(n_channels));
    }
    const std::size_t n = x.size() / n_channels;
    std::vector<std::vector<double>> out(n_channels, std::vector<double>(n));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < n_channels; ++c) out[c][t] = x[t * n_channels + c];
    }
    return out;
}

}  // namespace tisc
