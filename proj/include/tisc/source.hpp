#pragma once

#include <vector>

#include "tisc/dataset.hpp"
#include "tisc/network.hpp"

namespace tisc {

inline void check_compatible(const NetworkConfig& cfg, const SegmentDataset& ds) {
    if (ds.n_channels != cfg.data_channels) {
        throw data_error("dataset has " + std::to_string(ds.n_channels) +
                         " channels, network expects " + std::to_string(cfg.data_channels));
    }
    if (ds.seg_len != cfg.seg_len) {
        throw data_error("dataset seg_len " + std::to_string(ds.seg_len) +
                         " does not match network seg_len " + std::to_string(cfg.seg_len));
    }
    for (std::uint16_t l : ds.labels) {
        if (l >= cfg.num_classes) {
            throw data_error("dataset label " + std::to_string(l) +
                             " out of range for " + std::to_string(cfg.num_classes) +
                             " classes");
        }
    }
}

// View of a SegmentDataset through an optional index subset; hands the trainer
// assembled (normalized, interleaved) f64 inputs. The trainer is templated on
// this interface so tests can wrap it with access loggers.
struct SegmentSource {
    const SegmentDataset* ds = nullptr;
    const NetworkConfig* cfg = nullptr;
    std::vector<std::size_t> index;  // subset mapping; identity when built whole

    SegmentSource() = default;
    SegmentSource(const SegmentDataset& d, const NetworkConfig& c)
        : ds(&d), cfg(&c) {
        check_compatible(c, d);
        index.resize(d.n_segments);
        for (std::size_t i = 0; i < d.n_segments; ++i) index[i] = i;
    }
    SegmentSource(const SegmentDataset& d, const NetworkConfig& c,
                  std::vector<std::size_t> subset)
        : ds(&d), cfg(&c), index(std::move(subset)) {
        check_compatible(c, d);
    }

    std::size_t size() const { return index.size(); }
    std::size_t label(std::size_t i) const { return ds->labels[index[i]]; }

    void input(std::size_t i, std::vector<double>& out) const {
        const std::size_t seg = index[i];
        std::vector<std::span<const float>> chans;
        chans.reserve(ds->n_channels);
        for (std::size_t c = 0; c < ds->n_channels; ++c) chans.push_back(ds->channel(seg, c));
        assemble_input(*cfg, chans, out);
    }

    std::vector<std::size_t> labels() const {
        std::vector<std::size_t> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = label(i);
        return out;
    }
};

}  // namespace tisc
