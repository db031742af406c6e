#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tisc/layers.hpp"

namespace tisc {

// Hand-derived adjoints of the forward ops. Every backward takes the upstream
// gradient with respect to the layer's activation output plus the cached
// pre-activations, applies the activation derivative, and accumulates (+=)
// into the given gradient buffers. Callers zero the buffers; placeholder
// weight slots are never written, so they stay at zero.

struct InputLayerGrads {
    ScaleRange scales;
    std::vector<double> weights;
    std::vector<double> biases;

    static InputLayerGrads like(const TiScInputLayer& l) {
        return {l.scales, std::vector<double>(l.weights.size(), 0.0),
                std::vector<double>(l.biases.size(), 0.0)};
    }
    void zero() {
        std::fill(weights.begin(), weights.end(), 0.0);
        std::fill(biases.begin(), biases.end(), 0.0);
    }
};

inline void backward_input(const TiScInputLayer& layer, std::span<const double> x,
                           const EmbeddingTree& pre, const EmbeddingTree& d_out,
                           InputLayerGrads& g, std::vector<double>* dx = nullptr) {
    detail::check_input_shape(layer, x.size());
    if (d_out.size() != pre.size() || pre.segment_length != x.size() ||
        g.weights.size() != layer.weights.size() || g.biases.size() != layer.biases.size()) {
        throw std::invalid_argument("backward_input: shape mismatch");
    }
    if (dx && dx->size() != x.size()) {
        throw std::invalid_argument("backward_input: dx shape mismatch");
    }
    const std::size_t n = x.size();
    for (int l = layer.scales.lambda_min; l <= layer.scales.lambda_max; ++l) {
        const std::size_t w = std::size_t(1) << l;
        const std::size_t rows = n >> l;
        const std::size_t base = rows - 1;
        const WeightSlice ws = weight_slice(layer, l);
        const double* kernel = layer.weights.data() + ws.begin;
        double* dkernel = g.weights.data() + ws.begin;
        double& dbias = g.biases[std::size_t(l - layer.scales.lambda_min)];
        for (std::size_t i = 0; i < rows; ++i) {
            const double delta =
                d_out.values[base + i] * activate_grad(layer.activation, pre.values[base + i]);
            if (delta == 0.0) continue;
            const double* row = x.data() + i * w;
            dbias += delta;
            for (std::size_t k = 0; k < w; ++k) dkernel[k] += delta * row[k];
            if (dx) {
                double* drow = dx->data() + i * w;
                for (std::size_t k = 0; k < w; ++k) drow[k] += delta * kernel[k];
            }
        }
    }
}

struct HiddenLayerGrads {
    std::vector<std::vector<double>> kernels;
    std::vector<double> biases;

    static HiddenLayerGrads like(const TiScHiddenLayer& l) {
        HiddenLayerGrads g;
        for (const auto& k : l.kernels) g.kernels.emplace_back(k.size(), 0.0);
        g.biases.assign(l.biases.size(), 0.0);
        return g;
    }
    void zero() {
        for (auto& k : kernels) std::fill(k.begin(), k.end(), 0.0);
        std::fill(biases.begin(), biases.end(), 0.0);
    }
};

// d_e, when given, must be a zeroed (or accumulating) tree shaped like e;
// contributions are scatter-added over each window's support nodes.
inline void backward_hidden(const TiScHiddenLayer& layer, const EmbeddingTree& e,
                            const EmbeddingTree& pre, const EmbeddingTree& d_out,
                            HiddenLayerGrads& g, EmbeddingTree* d_e = nullptr) {
    detail::check_hidden_shape(layer, e);
    if (d_out.size() != pre.size() || g.biases.size() != layer.biases.size() ||
        g.kernels.size() != layer.kernels.size()) {
        throw std::invalid_argument("backward_hidden: shape mismatch");
    }
    if (d_e && d_e->size() != e.size()) {
        throw std::invalid_argument("backward_hidden: d_e shape mismatch");
    }
    const std::size_t n = e.segment_length;
    for (int lh = layer.out_scales.lambda_min; lh <= layer.out_scales.lambda_max; ++lh) {
        const auto taps = detail::support_taps(n, layer.in_scales, lh);
        const std::vector<double>& kernel = layer.kernel(lh);
        std::vector<double>& dkernel = g.kernels[std::size_t(lh - layer.out_scales.lambda_min)];
        double& dbias = g.biases[std::size_t(lh - layer.out_scales.lambda_min)];
        const std::size_t rows = n >> lh;
        const std::size_t base = rows - 1;
        for (std::size_t i = 0; i < rows; ++i) {
            const double delta =
                d_out.values[base + i] * activate_grad(layer.activation, pre.values[base + i]);
            if (delta == 0.0) continue;
            dbias += delta;
            for (std::size_t t = 0; t < taps.size(); ++t) {
                const std::size_t src = taps[t].base + (i << taps[t].shift);
                dkernel[t] += delta * e.values[src];
                if (d_e) d_e->values[src] += delta * kernel[t];
            }
        }
    }
}

// Dense classification head: scores = a * W + b with W stored row-major
// [activation][class].
struct DenseHead {
    std::size_t in_dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    static DenseHead zeros(std::size_t in_dim, std::size_t num_classes) {
        DenseHead h;
        h.in_dim = in_dim;
        h.num_classes = num_classes;
        h.weights.assign(in_dim * num_classes, 0.0);
        h.biases.assign(num_classes, 0.0);
        return h;
    }
};

inline void forward_dense(const DenseHead& head, std::span<const double> a,
                          std::span<double> scores) {
    if (a.size() != head.in_dim || scores.size() != head.num_classes) {
        throw std::invalid_argument("forward_dense: shape mismatch");
    }
    for (std::size_t c = 0; c < head.num_classes; ++c) scores[c] = head.biases[c];
    for (std::size_t i = 0; i < head.in_dim; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        const double* w = head.weights.data() + i * head.num_classes;
        for (std::size_t c = 0; c < head.num_classes; ++c) scores[c] += ai * w[c];
    }
}

struct DenseGrads {
    std::vector<double> weights;
    std::vector<double> biases;

    static DenseGrads like(const DenseHead& h) {
        return {std::vector<double>(h.weights.size(), 0.0),
                std::vector<double>(h.biases.size(), 0.0)};
    }
    void zero() {
        std::fill(weights.begin(), weights.end(), 0.0);
        std::fill(biases.begin(), biases.end(), 0.0);
    }
};

inline void backward_dense(const DenseHead& head, std::span<const double> a,
                           std::span<const double> dscores, DenseGrads& g,
                           std::span<double> da = {}) {
    if (a.size() != head.in_dim || dscores.size() != head.num_classes ||
        g.weights.size() != head.weights.size() || g.biases.size() != head.biases.size()) {
        throw std::invalid_argument("backward_dense: shape mismatch");
    }
    if (!da.empty() && da.size() != head.in_dim) {
        throw std::invalid_argument("backward_dense: da shape mismatch");
    }
    for (std::size_t c = 0; c < head.num_classes; ++c) g.biases[c] += dscores[c];
    for (std::size_t i = 0; i < head.in_dim; ++i) {
        const double ai = a[i];
        const double* w = head.weights.data() + i * head.num_classes;
        double* dw = g.weights.data() + i * head.num_classes;
        double acc = 0.0;
        for (std::size_t c = 0; c < head.num_classes; ++c) {
            dw[c] += ai * dscores[c];
            acc += w[c] * dscores[c];
        }
        if (!da.empty()) da[i] += acc;
    }
}

// Softmax cross-entropy against a one-hot label with the fused stable
// gradient (softmax - onehot) written into dscores when non-empty.
inline double softmax_cross_entropy(std::span<const double> scores, std::size_t label,
                                    std::span<double> dscores = {}) {
    if (label >= scores.size()) {
        throw std::out_of_range("softmax_cross_entropy: class " + std::to_string(label) +
                                " out of range for " + std::to_string(scores.size()) +
                                " classes");
    }
    if (!dscores.empty() && dscores.size() != scores.size()) {
        throw std::invalid_argument("softmax_cross_entropy: gradient shape mismatch");
    }
    double m = scores[0];
    for (double s : scores) m = std::max(m, s);
    double z = 0.0;
    for (double s : scores) z += std::exp(s - m);
    const double logz = std::log(z) + m;
    if (!dscores.empty()) {
        for (std::size_t c = 0; c < scores.size(); ++c) {
            dscores[c] = std::exp(scores[c] - logz) - (c == label ? 1.0 : 0.0);
        }
    }
    return logz - scores[label];
}

inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace tisc
