#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "tisc/tree.hpp"

namespace tisc {

// Gather order inside hidden kernels and the head input is scale-major,
// offset-ascending. Serialized models record this tag so files produced under
// a different ordering are rejected instead of silently misread.
inline constexpr std::uint32_t kSupportOrderVersion = 1;

namespace detail {

// four-lane dot product with a fixed summation order; the fast forward path
inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

struct WeightSlice {
    std::size_t begin;
    std::size_t end;
    std::size_t size() const { return end - begin; }
    bool operator==(const WeightSlice&) const = default;
};

// Learned waveforms of exponentially increasing length, one per scale, packed
// into a single flat array with binary-tree indexing: the kernel for scale l
// occupies [2^l - 1, 2^(l+1) - 1). Slots below 2^lambda_min - 1 are
// placeholders pinned at zero; they are excluded from updates and from active
// parameter counts.
struct TiScInputLayer {
    ScaleRange scales;
    std::vector<double> weights;
    std::vector<double> biases;  // one per scale, index lambda - lambda_min
    ActivationKind activation = ActivationKind::relu;

    static std::size_t weight_store_size(const ScaleRange& s) {
        return (std::size_t(2) << s.lambda_max) - 1;
    }

    static TiScInputLayer zeros(ScaleRange s, ActivationKind a) {
        TiScInputLayer l;
        l.scales = s;
        l.weights.assign(weight_store_size(s), 0.0);
        l.biases.assign(std::size_t(s.count()), 0.0);
        l.activation = a;
        return l;
    }

    double bias(int lambda) const { return biases.at(std::size_t(lambda - scales.lambda_min)); }
    double& bias(int lambda) { return biases.at(std::size_t(lambda - scales.lambda_min)); }
};

inline WeightSlice weight_slice(const TiScInputLayer& layer, int lambda) {
    if (!layer.scales.contains(lambda)) {
        throw std::out_of_range("weight_slice: scale " + std::to_string(lambda) +
                                " outside [" + std::to_string(layer.scales.lambda_min) + ", " +
                                std::to_string(layer.scales.lambda_max) + "]");
    }
    return WeightSlice{(std::size_t(1) << lambda) - 1, (std::size_t(2) << lambda) - 1};
}

namespace detail {

inline void check_input_shape(const TiScInputLayer& layer, std::size_t n) {
    if (!is_pow2(n)) {
        throw std::invalid_argument("forward_input: segment length " + std::to_string(n) +
                                    " is not a power of two");
    }
    if ((std::size_t(1) << layer.scales.lambda_max) > n) {
        throw std::invalid_argument("forward_input: segment length " + std::to_string(n) +
                                    " shorter than the largest window 2^" +
                                    std::to_string(layer.scales.lambda_max));
    }
    if (layer.weights.size() != TiScInputLayer::weight_store_size(layer.scales) ||
        layer.biases.size() != std::size_t(layer.scales.count())) {
        throw std::invalid_argument("forward_input: layer buffers do not match its scales");
    }
}

}  // namespace detail

// Fast path: per scale the input is viewed as L/2^l rows of length 2^l and
// reduced against the kernel in one pass, writing the scale's whole tree block.
// When `pre` is given it receives the pre-activations for later backprop.
inline void forward_input(const TiScInputLayer& layer, std::span<const double> x,
                          EmbeddingTree& out, EmbeddingTree* pre = nullptr) {
    detail::check_input_shape(layer, x.size());
    const std::size_t n = x.size();
    out.reset(n, layer.scales);
    if (pre) pre->reset(n, layer.scales);
    for (int l = layer.scales.lambda_min; l <= layer.scales.lambda_max; ++l) {
        const std::size_t w = std::size_t(1) << l;
        const std::size_t rows = n >> l;
        const double* kernel = layer.weights.data() + (w - 1);
        const double b = layer.bias(l);
        double* dst = out.values.data() + (rows - 1);
        double* pdst = pre ? pre->values.data() + (rows - 1) : nullptr;
        const double* row = x.data();
        for (std::size_t i = 0; i < rows; ++i, row += w) {
            const double z = detail::dot(kernel, row, w) + b;
            if (pdst) pdst[i] = z;
            dst[i] = activate(layer.activation, z);
        }
    }
}

inline EmbeddingTree forward_input(const TiScInputLayer& layer, std::span<const double> x) {
    EmbeddingTree out;
    forward_input(layer, x, out);
    return out;
}

// Reference path: same contract as forward_input, with every window gathered
// and reduced one element at a time. Kept deliberately free of the reshaped
// fast-path machinery so the two can check each other.
inline EmbeddingTree naive_forward(const TiScInputLayer& layer, std::span<const double> x) {
    detail::check_input_shape(layer, x.size());
    const std::size_t n = x.size();
    EmbeddingTree out = EmbeddingTree::zeros(n, layer.scales);
    std::vector<double> window;
    for (int l = layer.scales.lambda_min; l <= layer.scales.lambda_max; ++l) {
        const std::size_t w = std::size_t(1) << l;
        const WeightSlice ws = weight_slice(layer, l);
        for (std::size_t i = 0; i < n / w; ++i) {
            window.clear();
            for (std::size_t k = 0; k < w; ++k) window.push_back(x[i * w + k]);
            double z = layer.bias(l);
            for (std::size_t k = 0; k < w; ++k) z += layer.weights[ws.begin + k] * window[k];
            out.values[node_index(n, l, i)] = activate(layer.activation, z);
        }
    }
    return out;
}

struct SupportNode {
    int scale;
    std::size_t offset;  // relative to the output window
    bool operator==(const SupportNode&) const = default;
};

// Upstream nodes whose receptive field fits entirely inside one window of
// length 2^lambda_h, in scale-major offset-ascending order. A node whose field
// equals the window (same scale) is included.
inline std::vector<SupportNode> hidden_kernel_support(const ScaleRange& in_scales,
                                                      int lambda_h) {
    if (lambda_h < in_scales.lambda_min) {
        throw std::invalid_argument("hidden_kernel_support: output scale " +
                                    std::to_string(lambda_h) + " below input lambda_min " +
                                    std::to_string(in_scales.lambda_min));
    }
    std::vector<SupportNode> nodes;
    const int top = lambda_h < in_scales.lambda_max ? lambda_h : in_scales.lambda_max;
    for (int l = in_scales.lambda_min; l <= top; ++l) {
        const std::size_t per_window = std::size_t(1) << (lambda_h - l);
        for (std::size_t r = 0; r < per_window; ++r) nodes.push_back({l, r});
    }
    return nodes;
}

inline std::size_t hidden_kernel_size(const ScaleRange& in_scales, int lambda_h) {
    std::size_t k = 0;
    const int top = lambda_h < in_scales.lambda_max ? lambda_h : in_scales.lambda_max;
    for (int l = in_scales.lambda_min; l <= top; ++l) k += std::size_t(1) << (lambda_h - l);
    return k;
}

// Combines embedded activations with the same translation-dilation pattern as
// the input layer: one shared kernel per output scale, applied across all of
// that scale's windows. The final hidden layer uses the identity activation.
struct TiScHiddenLayer {
    ScaleRange in_scales;
    ScaleRange out_scales;
    std::vector<std::vector<double>> kernels;  // index lambda_h - out_scales.lambda_min
    std::vector<double> biases;
    ActivationKind activation = ActivationKind::identity;

    static TiScHiddenLayer zeros(ScaleRange in, ScaleRange out, ActivationKind a) {
        if (out.lambda_min < in.lambda_min + 1) {
            throw config_error("hidden layer: out lambda_min " + std::to_string(out.lambda_min) +
                               " must be at least in lambda_min + 1 = " +
                               std::to_string(in.lambda_min + 1));
        }
        if (out.lambda_max > in.lambda_max) {
            throw config_error("hidden layer: out lambda_max " + std::to_string(out.lambda_max) +
                               " exceeds in lambda_max " + std::to_string(in.lambda_max));
        }
        TiScHiddenLayer l;
        l.in_scales = in;
        l.out_scales = out;
        l.activation = a;
        for (int lh = out.lambda_min; lh <= out.lambda_max; ++lh) {
            l.kernels.emplace_back(hidden_kernel_size(in, lh), 0.0);
        }
        l.biases.assign(std::size_t(out.count()), 0.0);
        return l;
    }

    const std::vector<double>& kernel(int lambda_h) const {
        return kernels.at(std::size_t(lambda_h - out_scales.lambda_min));
    }
    std::vector<double>& kernel(int lambda_h) {
        return kernels.at(std::size_t(lambda_h - out_scales.lambda_min));
    }
    double bias(int lambda_h) const {
        return biases.at(std::size_t(lambda_h - out_scales.lambda_min));
    }
};

namespace detail {

// absolute tree index of support tap t for output window i is
// taps[t].base + (i << taps[t].shift)
struct SupportTap {
    std::size_t base;
    unsigned shift;
};

inline std::vector<SupportTap> support_taps(std::size_t segment_length,
                                            const ScaleRange& in_scales, int lambda_h) {
    std::vector<SupportTap> taps;
    for (const SupportNode& s : hidden_kernel_support(in_scales, lambda_h)) {
        taps.push_back({scale_base(segment_length, s.scale) + s.offset,
                        unsigned(lambda_h - s.scale)});
    }
    return taps;
}

inline void check_hidden_shape(const TiScHiddenLayer& layer, const EmbeddingTree& e) {
    if (!(e.scales == layer.in_scales)) {
        throw std::invalid_argument("forward_hidden: embedding scales [" +
                                    std::to_string(e.scales.lambda_min) + ", " +
                                    std::to_string(e.scales.lambda_max) +
                                    "] do not match the layer's input scales [" +
                                    std::to_string(layer.in_scales.lambda_min) + ", " +
                                    std::to_string(layer.in_scales.lambda_max) + "]");
    }
    if ((std::size_t(1) << layer.out_scales.lambda_max) > e.segment_length) {
        throw std::invalid_argument("forward_hidden: output window exceeds segment length");
    }
}

}  // namespace detail

inline void forward_hidden(const TiScHiddenLayer& layer, const EmbeddingTree& e,
                           EmbeddingTree& out, EmbeddingTree* pre = nullptr) {
    detail::check_hidden_shape(layer, e);
    const std::size_t n = e.segment_length;
    out.reset(n, layer.out_scales);
    if (pre) pre->reset(n, layer.out_scales);
    std::vector<double> gathered;
    for (int lh = layer.out_scales.lambda_min; lh <= layer.out_scales.lambda_max; ++lh) {
        const auto taps = detail::support_taps(n, layer.in_scales, lh);
        const std::vector<double>& kernel = layer.kernel(lh);
        if (kernel.size() != taps.size()) {
            throw std::invalid_argument("forward_hidden: kernel size mismatch at scale " +
                                        std::to_string(lh));
        }
        const double b = layer.bias(lh);
        const std::size_t rows = n >> lh;
        double* dst = out.values.data() + (rows - 1);
        double* pdst = pre ? pre->values.data() + (rows - 1) : nullptr;
        gathered.resize(taps.size());
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t t = 0; t < taps.size(); ++t) {
                gathered[t] = e.values[taps[t].base + (i << taps[t].shift)];
            }
            const double z = detail::dot(kernel.data(), gathered.data(), taps.size()) + b;
            if (pdst) pdst[i] = z;
            dst[i] = activate(layer.activation, z);
        }
    }
}

inline EmbeddingTree forward_hidden(const TiScHiddenLayer& layer, const EmbeddingTree& e) {
    EmbeddingTree out;
    forward_hidden(layer, e, out);
    return out;
}

}  // namespace tisc
