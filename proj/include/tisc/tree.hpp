#pragma once

#include <cstddef>
#include <vector>

#include "tisc/scales.hpp"

namespace tisc {

// Activations are stored as an inverted binary tree in one flat buffer.
// Node (scale l, offset i) lives at index i + L/2^l - 1, so a whole scale is
// the contiguous block [L/2^l - 1, 2*L/2^l - 1) and children of node j sit at
// 2j+1 / 2j+2. Moving one scale down doubles the block, moving up halves it.

inline std::size_t windows_at(std::size_t segment_length, int lambda) {
    return segment_length >> lambda;
}

inline std::size_t scale_base(std::size_t segment_length, int lambda) {
    return (segment_length >> lambda) - 1;
}

inline std::size_t node_index(std::size_t segment_length, int lambda, std::size_t offset) {
    if (lambda < 0 || lambda > ilog2(segment_length)) {
        throw std::out_of_range("node_index: scale " + std::to_string(lambda) +
                                " outside [0, " + std::to_string(ilog2(segment_length)) + "]");
    }
    const std::size_t n = windows_at(segment_length, lambda);
    if (offset >= n) {
        throw std::out_of_range("node_index: offset " + std::to_string(offset) +
                                " >= window count " + std::to_string(n) + " at scale " +
                                std::to_string(lambda));
    }
    return offset + n - 1;
}

struct NodeRef {
    int scale;
    std::size_t offset;
    bool operator==(const NodeRef&) const = default;
};

// inverse of node_index
inline NodeRef node_at(std::size_t segment_length, std::size_t index) {
    const std::size_t w = std::bit_floor(index + 1);  // windows at that scale
    if (w > segment_length) {
        throw std::out_of_range("node_at: index " + std::to_string(index) +
                                " below scale 0 for segment length " +
                                std::to_string(segment_length));
    }
    return NodeRef{ilog2(segment_length) - ilog2(w), index + 1 - w};
}

inline std::size_t child_left(std::size_t index) { return 2 * index + 1; }
inline std::size_t child_right(std::size_t index) { return 2 * index + 2; }

inline std::size_t parent(std::size_t index) {
    if (index == 0) throw std::out_of_range("parent: root has no parent");
    return (index - 1) / 2;
}

// Half-open interval of interleaved samples.
struct SampleInterval {
    std::size_t begin;
    std::size_t end;
    bool operator==(const SampleInterval&) const = default;
    bool contains(const SampleInterval& other) const {
        return begin <= other.begin && other.end <= end;
    }
};

inline SampleInterval receptive_field(std::size_t segment_length, int lambda,
                                      std::size_t offset) {
    node_index(segment_length, lambda, offset);  // range check
    const std::size_t w = std::size_t(1) << lambda;
    return SampleInterval{offset * w, (offset + 1) * w};
}

// Per-channel time interval covered after de-interleaving C channels: a scale-l
// window over the interleaved vector spans the same time as a scale-(l-log2 C)
// window over a single channel.
inline SampleInterval receptive_field_time(std::size_t segment_length,
                                           std::size_t n_channels, int lambda,
                                           std::size_t offset) {
    const SampleInterval f = receptive_field(segment_length, lambda, offset);
    return SampleInterval{f.begin / n_channels, f.end / n_channels};
}

// number of stored slots when the deepest stored scale is lambda_min
inline std::size_t tree_node_count(std::size_t segment_length, int lambda_min) {
    return 2 * (segment_length >> lambda_min) - 1;
}

struct EmbeddingTree {
    std::vector<double> values;
    std::size_t segment_length = 0;
    ScaleRange scales;

    static EmbeddingTree zeros(std::size_t segment_length, ScaleRange scales) {
        EmbeddingTree t;
        t.reset(segment_length, scales);
        return t;
    }

    void reset(std::size_t length, ScaleRange s) {
        validate_scales(s, length, "EmbeddingTree");
        segment_length = length;
        scales = s;
        values.assign(tree_node_count(length, s.lambda_min), 0.0);
    }

    std::size_t size() const { return values.size(); }
    bool stores(std::size_t index) const { return index < values.size(); }

    double at(int lambda, std::size_t offset) const {
        return values.at(node_index(segment_length, lambda, offset));
    }
    double& at(int lambda, std::size_t offset) {
        return values.at(node_index(segment_length, lambda, offset));
    }

    // contiguous span of slots belonging to scales inside the range
    std::size_t active_begin() const { return scale_base(segment_length, scales.lambda_max); }
    std::size_t active_end() const { return 2 * (segment_length >> scales.lambda_min) - 1; }
    std::size_t active_count() const { return active_end() - active_begin(); }
};

}  // namespace tisc
