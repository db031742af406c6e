#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tisc/network.hpp"

namespace tisc {

struct ChannelGrads {
    InputLayerGrads input;
    std::vector<HiddenLayerGrads> hidden;
};

// Parameter-shaped buffers; used both for gradient accumulation and for
// optimizer state. Placeholder slots exist in the input-weight arrays but are
// never written, so they carry identically zero values.
struct NetworkGrads {
    std::vector<ChannelGrads> channels;
    DenseGrads head;

    static NetworkGrads like(const Network& net) {
        NetworkGrads g;
        for (const TiScChannel& ch : net.channels) {
            ChannelGrads cg;
            cg.input = InputLayerGrads::like(ch.input);
            for (const TiScHiddenLayer& h : ch.hidden) cg.hidden.push_back(HiddenLayerGrads::like(h));
            g.channels.push_back(std::move(cg));
        }
        g.head = DenseGrads::like(net.head);
        return g;
    }

    void zero() {
        for (ChannelGrads& cg : channels) {
            cg.input.zero();
            for (HiddenLayerGrads& h : cg.hidden) h.zero();
        }
        head.zero();
    }
};

namespace detail {

// The learnable parameter blocks in serialization order, placeholders
// excluded. Network and NetworkGrads expose congruent block lists, so zipping
// them walks (param, grad) pairs.
template <class Net, class Vec>
inline void collect_blocks(Net& net, std::vector<std::span<Vec>>& out) {
    for (auto& ch : net.channels) {
        auto& input = ch.input;
        const std::size_t lo = (std::size_t(1) << input.scales.lambda_min) - 1;
        out.push_back(std::span<Vec>(input.weights.data() + lo, input.weights.size() - lo));
        out.push_back(std::span<Vec>(input.biases.data(), input.biases.size()));
        for (auto& h : ch.hidden) {
            for (auto& k : h.kernels) out.push_back(std::span<Vec>(k.data(), k.size()));
            out.push_back(std::span<Vec>(h.biases.data(), h.biases.size()));
        }
    }
    out.push_back(std::span<Vec>(net.head.weights.data(), net.head.weights.size()));
    out.push_back(std::span<Vec>(net.head.biases.data(), net.head.biases.size()));
}

template <class Net>
inline std::size_t input_scale_count(Net& net) {
    return net.channels.empty() ? 0 : std::size_t(net.channels[0].input.scales.count());
}

}  // namespace detail

inline std::vector<std::span<double>> param_blocks(Network& net) {
    std::vector<std::span<double>> out;
    detail::collect_blocks(net, out);
    return out;
}

inline std::vector<std::span<double>> grad_blocks(NetworkGrads& g) {
    std::vector<std::span<double>> out;
    detail::collect_blocks(g, out);
    return out;
}

inline std::vector<std::span<const double>> param_blocks(const Network& net) {
    std::vector<std::span<const double>> out;
    detail::collect_blocks(net, out);
    return out;
}

inline std::size_t active_param_count(const Network& net) {
    std::size_t n = 0;
    for (const auto& b : param_blocks(net)) n += b.size();
    return n;
}

// g += s * other, block by block
inline void add_scaled(NetworkGrads& g, const NetworkGrads& other, double s) {
    auto dst = grad_blocks(g);
    auto src = grad_blocks(const_cast<NetworkGrads&>(other));
    if (dst.size() != src.size()) throw std::invalid_argument("add_scaled: shape mismatch");
    for (std::size_t b = 0; b < dst.size(); ++b) {
        if (dst[b].size() != src[b].size()) {
            throw std::invalid_argument("add_scaled: block shape mismatch");
        }
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += s * src[b][i];
    }
}

inline void scale(NetworkGrads& g, double s) {
    for (auto& block : grad_blocks(g)) {
        for (double& v : block) v *= s;
    }
}

// scratch trees for the reverse sweep, reused across samples
struct BackpropBuffers {
    std::vector<std::vector<EmbeddingTree>> dtrees;  // per channel, per layer
    std::vector<double> dhead_in;
    std::vector<double> dscores;

    void ensure(const Network& net) {
        const std::size_t layers = net.layers_per_channel();
        dtrees.resize(net.channels.size());
        for (auto& v : dtrees) v.resize(layers);
        dhead_in.resize(net.head.in_dim);
        dscores.resize(net.head.num_classes);
    }
};

// Reverse pass for one sample given its forward trace; parameter gradients are
// accumulated (+=) into g. When d_input is non-null it receives dL/dx
// (accumulated, caller zeroes).
inline void network_backward(const Network& net, const ForwardTrace& t,
                             std::span<const double> dscores, NetworkGrads& g,
                             BackpropBuffers& ws, std::vector<double>* d_input = nullptr) {
    ws.ensure(net);
    std::fill(ws.dhead_in.begin(), ws.dhead_in.end(), 0.0);
    backward_dense(net.head, t.head_in, dscores, g.head, ws.dhead_in);

    const double inv_keep = t.dropout_applied ? 1.0 / (1.0 - t.dropout_rate) : 1.0;
    std::size_t cursor = 0;
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        const TiScChannel& channel = net.channels[ch];
        const ChannelTrace& ct = t.channels[ch];
        const std::size_t layers = net.layers_per_channel();

        // scatter the head-input gradient back onto the final tree
        EmbeddingTree& dlast = ws.dtrees[ch][layers - 1];
        const EmbeddingTree& last_out = ct.layers[layers - 1].out;
        dlast.reset(last_out.segment_length, last_out.scales);
        for (int l = last_out.scales.lambda_min; l <= last_out.scales.lambda_max; ++l) {
            const std::size_t base = scale_base(last_out.segment_length, l);
            const std::size_t rows = windows_at(last_out.segment_length, l);
            for (std::size_t i = 0; i < rows; ++i) dlast.values[base + i] = ws.dhead_in[cursor++];
        }

        for (std::size_t li = layers; li-- > 0;) {
            const LayerTrace& lt = ct.layers[li];
            EmbeddingTree& dout = ws.dtrees[ch][li];
            if (t.dropout_applied) {
                for (std::size_t j = dout.active_begin(); j < dout.active_end(); ++j) {
                    dout.values[j] = lt.keep[j] ? dout.values[j] * inv_keep : 0.0;
                }
            }
            if (li == 0) {
                backward_input(channel.input, t.input, lt.pre, dout, g.channels[ch].input,
                               d_input);
            } else {
                const EmbeddingTree& below = ct.layers[li - 1].out;
                EmbeddingTree& dbelow = ws.dtrees[ch][li - 1];
                dbelow.reset(below.segment_length, below.scales);
                backward_hidden(channel.hidden[li - 1], below, lt.pre, dout,
                                g.channels[ch].hidden[li - 1], &dbelow);
            }
        }
    }
}

// loss + gradient for one labelled sample; the workhorse of the training loop
inline double sample_loss_and_grad(const Network& net, std::span<const double> x,
                                   std::size_t label, bool train, Rng* dropout_rng,
                                   NetworkGrads& g, ForwardTrace& t, BackpropBuffers& ws) {
    forward(net, x, train, dropout_rng, t);
    ws.ensure(net);
    const double loss = softmax_cross_entropy(t.scores, label, ws.dscores);
    network_backward(net, t, ws.dscores, g, ws);
    return loss;
}

struct GradCheckEntry {
    std::string block;
    std::size_t index = 0;
    double analytic = 0.0;
    double fd = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    GradCheckEntry worst;
    std::size_t checked = 0;
    std::vector<GradCheckEntry> failures;
    double tolerance = 0.0;
    bool pass() const { return max_rel_err <= tolerance; }
};

namespace detail {

inline std::vector<std::string> block_names(const Network& net) {
    std::vector<std::string> names;
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        const std::string p = "ch" + std::to_string(ch) + ".";
        names.push_back(p + "input.weights");
        names.push_back(p + "input.biases");
        for (std::size_t hi = 0; hi < net.channels[ch].hidden.size(); ++hi) {
            const TiScHiddenLayer& h = net.channels[ch].hidden[hi];
            for (int lh = h.out_scales.lambda_min; lh <= h.out_scales.lambda_max; ++lh) {
                names.push_back(p + "hidden" + std::to_string(hi) + ".kernel" +
                                std::to_string(lh));
            }
            names.push_back(p + "hidden" + std::to_string(hi) + ".biases");
        }
    }
    names.push_back("head.weights");
    names.push_back("head.biases");
    return names;
}

}  // namespace detail

// Compares every active parameter's analytic gradient against central finite
// differences of the eval-mode loss. The relative error denominator is floored
// at 1e-6, below which finite differences cannot resolve anything above their
// own cancellation noise.
inline GradCheckReport grad_check(const Network& net, std::span<const double> x,
                                  std::size_t label, double tolerance, double h = 1e-5) {
    Network work = net;
    ForwardTrace trace;
    BackpropBuffers ws;
    NetworkGrads analytic = NetworkGrads::like(work);
    sample_loss_and_grad(work, x, label, false, nullptr, analytic, trace, ws);

    auto params = param_blocks(work);
    auto grads = grad_blocks(analytic);
    const auto names = detail::block_names(work);

    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            double& p = params[b][i];
            const double saved = p;
            p = saved + h;
            const double up = softmax_cross_entropy(forward_eval(work, x), label);
            p = saved - h;
            const double dn = softmax_cross_entropy(forward_eval(work, x), label);
            p = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double a = grads[b][i];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
            const double rel = std::abs(a - fd) / denom;
            ++report.checked;
            GradCheckEntry entry{names[b], i, a, fd, rel};
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = entry;
            }
            if (rel > tolerance && report.failures.size() < 32) {
                report.failures.push_back(entry);
            }
        }
    }
    return report;
}

}  // namespace tisc
