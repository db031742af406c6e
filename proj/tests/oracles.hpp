#pragma once

// Independent reference implementations used to cross-check the library.
// These deliberately avoid the production code paths they verify.

#include <stdexcept>
#include <vector>

#include "tisc/tisc.hpp"

namespace oracles {

inline double rel_err(double a, double b, double floor = 1e-12) {
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / denom;
}

// Hidden-layer forward derived purely from receptive-field containment: for
// every output window, every stored input node whose field fits inside the
// window is gathered (scale-major, offset-ascending by iteration order). No
// use of hidden_kernel_support or the tap tables.
inline tisc::EmbeddingTree containment_forward_hidden(const tisc::TiScHiddenLayer& layer,
                                                      const tisc::EmbeddingTree& e) {
    const std::size_t L = e.segment_length;
    tisc::EmbeddingTree out = tisc::EmbeddingTree::zeros(L, layer.out_scales);
    for (int lh = layer.out_scales.lambda_min; lh <= layer.out_scales.lambda_max; ++lh) {
        const std::vector<double>& kernel = layer.kernel(lh);
        for (std::size_t i = 0; i < (L >> lh); ++i) {
            const tisc::SampleInterval window = tisc::receptive_field(L, lh, i);
            std::vector<double> gathered;
            for (int l = layer.in_scales.lambda_min; l <= layer.in_scales.lambda_max; ++l) {
                for (std::size_t o = 0; o < (L >> l); ++o) {
                    if (window.contains(tisc::receptive_field(L, l, o))) {
                        gathered.push_back(e.at(l, o));
                    }
                }
            }
            if (gathered.size() != kernel.size()) {
                throw std::logic_error("containment oracle: support size " +
                                       std::to_string(gathered.size()) +
                                       " != kernel size " + std::to_string(kernel.size()));
            }
            double z = layer.bias(lh);
            for (std::size_t t = 0; t < kernel.size(); ++t) z += kernel[t] * gathered[t];
            out.values[tisc::node_index(L, lh, i)] = tisc::activate(layer.activation, z);
        }
    }
    return out;
}

// Same containment scan, reduced to the (scale, relative offset) list for one
// output window; checks hidden_kernel_support without its arithmetic.
inline std::vector<tisc::SupportNode> containment_support(const tisc::ScaleRange& in_scales,
                                                          int lambda_h, std::size_t L) {
    const tisc::SampleInterval window = tisc::receptive_field(L, lambda_h, 0);
    std::vector<tisc::SupportNode> nodes;
    for (int l = in_scales.lambda_min; l <= in_scales.lambda_max; ++l) {
        for (std::size_t o = 0; o < (L >> l); ++o) {
            if (window.contains(tisc::receptive_field(L, l, o))) nodes.push_back({l, o});
        }
    }
    return nodes;
}

// Brute-force cost enumeration: walks a constructed network, tallying one
// multiply per kernel element per window it is applied to, and counting the
// parameter slots the structs actually hold. Cross-checks count_costs'
// closed forms.
struct EnumeratedCosts {
    std::size_t active_params = 0;
    std::size_t stored_params = 0;
    std::size_t macs_total = 0;
    std::size_t activations = 0;
    std::vector<std::size_t> macs_per_layer;  // input, hidden..., head
};

inline EnumeratedCosts enumerate_costs(const tisc::Network& net) {
    EnumeratedCosts c;
    const std::size_t L = net.config.interleaved_length();
    const std::size_t n_layers = net.layers_per_channel();
    c.macs_per_layer.assign(n_layers + 1, 0);

    for (const tisc::TiScChannel& ch : net.channels) {
        std::size_t macs = 0;
        for (int l = ch.input.scales.lambda_min; l <= ch.input.scales.lambda_max; ++l) {
            const tisc::WeightSlice ws = tisc::weight_slice(ch.input, l);
            for (std::size_t i = 0; i < (L >> l); ++i) macs += ws.size();
            c.active_params += ws.size() + 1;
            c.activations += L >> l;
        }
        c.stored_params += ch.input.weights.size() + ch.input.biases.size();
        c.macs_per_layer[0] += macs;
        c.macs_total += macs;

        for (std::size_t hi = 0; hi < ch.hidden.size(); ++hi) {
            const tisc::TiScHiddenLayer& h = ch.hidden[hi];
            std::size_t hmacs = 0;
            for (int lh = h.out_scales.lambda_min; lh <= h.out_scales.lambda_max; ++lh) {
                for (std::size_t i = 0; i < (L >> lh); ++i) hmacs += h.kernel(lh).size();
                c.active_params += h.kernel(lh).size() + 1;
                c.stored_params += h.kernel(lh).size() + 1;
                c.activations += L >> lh;
            }
            c.macs_per_layer[1 + hi] += hmacs;
            c.macs_total += hmacs;
        }
    }
    c.active_params += net.head.weights.size() + net.head.biases.size();
    c.stored_params += net.head.weights.size() + net.head.biases.size();
    c.macs_per_layer[n_layers] = net.head.weights.size();
    c.macs_total += net.head.weights.size();
    return c;
}

// Draws (network, input) pairs until every pre-activation sits at least
// `margin` away from zero, so central differences at the relu kink always
// stay on one side. Purely a test-construction device: gradients are checked
// at points where they are defined.
inline std::pair<tisc::Network, std::vector<double>> conditioned_case(
    const tisc::NetworkConfig& cfg, std::uint64_t seed, double margin = 1e-3) {
    for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
        const std::uint64_t s = tisc::mix_seed(seed, 0xC0ED, attempt);
        tisc::Network net = tisc::build(cfg, s);
        tisc::Rng rng(tisc::mix_seed(s, 0xDA7A));
        std::vector<double> x(cfg.interleaved_length());
        for (double& v : x) v = rng.normal();
        tisc::ForwardTrace t;
        tisc::forward(net, x, false, nullptr, t);
        bool ok = true;
        for (const auto& ct : t.channels) {
            for (const auto& lt : ct.layers) {
                for (std::size_t j = lt.pre.active_begin(); ok && j < lt.pre.active_end(); ++j) {
                    if (std::abs(lt.pre.values[j]) < margin) ok = false;
                }
            }
        }
        if (ok) return {std::move(net), std::move(x)};
    }
    throw std::logic_error("conditioned_case: no admissible draw found");
}

}  // namespace oracles
