#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tisc/grad.hpp"
#include "tisc/interleave.hpp"
#include "tisc/layers.hpp"
#include "tisc/rng.hpp"

namespace tisc {

// Full architecture description. `seg_len` is the sample count per data
// channel; the network consumes the interleaved vector of length
// seg_len * data_channels. Each of the `tisc_channels` stacks processes the
// whole interleaved vector independently; one dense head reads them all.
struct NetworkConfig {
    std::size_t seg_len = 0;
    std::size_t data_channels = 1;
    std::size_t tisc_channels = 1;
    ScaleRange input_scales;
    std::vector<ScaleRange> hidden_stack;
    ActivationKind activation = ActivationKind::relu;
    double dropout_rate = 0.05;
    std::size_t num_classes = 2;
    bool normalize_input = true;  // per-channel z-score before interleaving

    std::size_t interleaved_length() const { return seg_len * data_channels; }

    void validate() const {
        if (seg_len == 0) throw config_error("config: seg_len must be positive");
        if (!is_pow2(data_channels)) {
            throw config_error("config: data_channels " + std::to_string(data_channels) +
                               " is not a power of two; pad with all-zero dummy channels");
        }
        if (!is_pow2(interleaved_length())) {
            throw config_error("config: interleaved length seg_len*data_channels = " +
                               std::to_string(interleaved_length()) +
                               " is not a power of two");
        }
        if (tisc_channels == 0) throw config_error("config: tisc_channels must be >= 1");
        validate_scales(input_scales, interleaved_length(), "config: input_scales");
        ScaleRange prev = input_scales;
        for (std::size_t i = 0; i < hidden_stack.size(); ++i) {
            const ScaleRange& h = hidden_stack[i];
            const std::string what = "config: hidden_stack[" + std::to_string(i) + "]";
            validate_scales(h, interleaved_length(), what);
            if (h.lambda_min < prev.lambda_min + 1) {
                throw config_error(what + ": lambda_min " + std::to_string(h.lambda_min) +
                                   " must be at least one above the previous layer's " +
                                   std::to_string(prev.lambda_min));
            }
            if (h.lambda_max > prev.lambda_max) {
                throw config_error(what + ": lambda_max " + std::to_string(h.lambda_max) +
                                   " exceeds the previous layer's " +
                                   std::to_string(prev.lambda_max));
            }
            prev = h;
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw config_error("config: dropout_rate must lie in [0, 1)");
        }
        if (num_classes < 2) throw config_error("config: num_classes must be >= 2");
    }

    const ScaleRange& final_scales() const {
        return hidden_stack.empty() ? input_scales : hidden_stack.back();
    }

    // nonlinearity per layer position; the last hidden layer is identity
    ActivationKind layer_activation(std::size_t layer_index) const {
        if (!hidden_stack.empty() && layer_index == hidden_stack.size()) {
            return ActivationKind::identity;
        }
        return activation;
    }

    std::size_t head_inputs_per_channel() const {
        const ScaleRange& f = final_scales();
        std::size_t n = 0;
        for (int l = f.lambda_min; l <= f.lambda_max; ++l) {
            n += interleaved_length() >> l;
        }
        return n;
    }
};

inline void to_json(nlohmann::json& j, const ScaleRange& s) {
    j = nlohmann::json::array({s.lambda_min, s.lambda_max});
}
inline void from_json(const nlohmann::json& j, ScaleRange& s) {
    if (!j.is_array() || j.size() != 2) {
        throw config_error("scale range must be a [lambda_min, lambda_max] pair");
    }
    s.lambda_min = j[0].get<int>();
    s.lambda_max = j[1].get<int>();
}

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"seg_len", c.seg_len},
                       {"data_channels", c.data_channels},
                       {"tisc_channels", c.tisc_channels},
                       {"input_scales", c.input_scales},
                       {"hidden", c.hidden_stack},
                       {"activation", to_string(c.activation)},
                       {"dropout", c.dropout_rate},
                       {"classes", c.num_classes},
                       {"normalize", c.normalize_input}};
}
inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
    c.seg_len = j.at("seg_len").get<std::size_t>();
    c.data_channels = j.value("data_channels", std::size_t(1));
    c.tisc_channels = j.value("tisc_channels", std::size_t(1));
    c.input_scales = j.at("input_scales").get<ScaleRange>();
    c.hidden_stack = j.value("hidden", std::vector<ScaleRange>{});
    c.activation = activation_from_string(j.value("activation", std::string("relu")));
    c.dropout_rate = j.value("dropout", 0.05);
    c.num_classes = j.value("classes", std::size_t(2));
    c.normalize_input = j.value("normalize", true);
}

struct TiScChannel {
    TiScInputLayer input;
    std::vector<TiScHiddenLayer> hidden;
};

struct Network {
    NetworkConfig config;
    std::vector<TiScChannel> channels;
    DenseHead head;
    std::uint64_t seed = 0;

    std::size_t layers_per_channel() const { return 1 + config.hidden_stack.size(); }
};

// Seeded build: every weight drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
// in a fixed order, so the same (config, seed) always yields the same network.
// Placeholder slots stay zero.
inline Network build(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Network net;
    net.config = cfg;
    net.seed = seed;
    Rng rng(mix_seed(seed, 0xB111D));
    for (std::size_t ch = 0; ch < cfg.tisc_channels; ++ch) {
        TiScChannel channel;
        channel.input = TiScInputLayer::zeros(cfg.input_scales, cfg.layer_activation(0));
        for (int l = cfg.input_scales.lambda_min; l <= cfg.input_scales.lambda_max; ++l) {
            const WeightSlice ws = weight_slice(channel.input, l);
            const double bound = 1.0 / std::sqrt(double(ws.size()));
            for (std::size_t k = ws.begin; k < ws.end; ++k) {
                channel.input.weights[k] = rng.uniform(-bound, bound);
            }
            channel.input.bias(l) = rng.uniform(-bound, bound);
        }
        ScaleRange prev = cfg.input_scales;
        for (std::size_t hi = 0; hi < cfg.hidden_stack.size(); ++hi) {
            TiScHiddenLayer layer = TiScHiddenLayer::zeros(prev, cfg.hidden_stack[hi],
                                                           cfg.layer_activation(hi + 1));
            for (int lh = layer.out_scales.lambda_min; lh <= layer.out_scales.lambda_max; ++lh) {
                std::vector<double>& kernel = layer.kernel(lh);
                const double bound = 1.0 / std::sqrt(double(kernel.size()));
                for (double& w : kernel) w = rng.uniform(-bound, bound);
                layer.biases[std::size_t(lh - layer.out_scales.lambda_min)] =
                    rng.uniform(-bound, bound);
            }
            channel.hidden.push_back(std::move(layer));
            prev = cfg.hidden_stack[hi];
        }
        net.channels.push_back(std::move(channel));
    }
    const std::size_t head_in = cfg.head_inputs_per_channel() * cfg.tisc_channels;
    net.head = DenseHead::zeros(head_in, cfg.num_classes);
    const double bound = 1.0 / std::sqrt(double(head_in));
    for (double& w : net.head.weights) w = rng.uniform(-bound, bound);
    for (double& b : net.head.biases) b = rng.uniform(-bound, bound);
    return net;
}

// Per-sample forward state kept around for backprop and attribution.
// `out` holds what the next layer actually consumed (post-activation,
// post-dropout); `keep` marks surviving activations when dropout ran.
struct LayerTrace {
    EmbeddingTree pre;
    EmbeddingTree out;
    std::vector<std::uint8_t> keep;
};

struct ChannelTrace {
    std::vector<LayerTrace> layers;
};

struct ForwardTrace {
    std::vector<double> input;
    std::vector<ChannelTrace> channels;
    std::vector<double> head_in;
    std::vector<double> scores;
    bool dropout_applied = false;
    double dropout_rate = 0.0;
};

namespace detail {

inline void apply_dropout(LayerTrace& t, double rate, Rng& rng) {
    const double inv_keep = 1.0 / (1.0 - rate);
    t.keep.assign(t.out.size(), std::uint8_t(1));
    for (std::size_t j = t.out.active_begin(); j < t.out.active_end(); ++j) {
        if (rng.uniform() < rate) {
            t.keep[j] = 0;
            t.out.values[j] = 0.0;
        } else {
            t.out.values[j] *= inv_keep;
        }
    }
}

// head input order: channel-major, then scale ascending, then offset ascending
inline void gather_head_input(const Network& net, const ForwardTrace& t,
                              std::vector<double>& head_in) {
    head_in.clear();
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        const EmbeddingTree& final_tree = t.channels[ch].layers.back().out;
        const ScaleRange& f = final_tree.scales;
        for (int l = f.lambda_min; l <= f.lambda_max; ++l) {
            const std::size_t base = scale_base(final_tree.segment_length, l);
            const std::size_t rows = windows_at(final_tree.segment_length, l);
            for (std::size_t i = 0; i < rows; ++i) head_in.push_back(final_tree.values[base + i]);
        }
    }
}

}  // namespace detail

// Train mode applies inverted dropout to every TiSc layer's output
// activations using `dropout_rng`; eval mode is deterministic and needs no
// generator. Scores are unnormalized class logits.
inline void forward(const Network& net, std::span<const double> x, bool train,
                    Rng* dropout_rng, ForwardTrace& t) {
    if (x.size() != net.config.interleaved_length()) {
        throw std::invalid_argument("forward: input length " + std::to_string(x.size()) +
                                    " does not match interleaved length " +
                                    std::to_string(net.config.interleaved_length()));
    }
    const bool use_dropout = train && net.config.dropout_rate > 0.0;
    if (use_dropout && !dropout_rng) {
        throw std::invalid_argument("forward: train mode with dropout needs an rng");
    }
    t.input.assign(x.begin(), x.end());
    t.dropout_applied = use_dropout;
    t.dropout_rate = net.config.dropout_rate;
    t.channels.resize(net.channels.size());
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        const TiScChannel& channel = net.channels[ch];
        ChannelTrace& ct = t.channels[ch];
        ct.layers.resize(net.layers_per_channel());
        forward_input(channel.input, x, ct.layers[0].out, &ct.layers[0].pre);
        if (use_dropout) detail::apply_dropout(ct.layers[0], net.config.dropout_rate, *dropout_rng);
        for (std::size_t hi = 0; hi < channel.hidden.size(); ++hi) {
            LayerTrace& lt = ct.layers[hi + 1];
            forward_hidden(channel.hidden[hi], ct.layers[hi].out, lt.out, &lt.pre);
            if (use_dropout) detail::apply_dropout(lt, net.config.dropout_rate, *dropout_rng);
        }
    }
    detail::gather_head_input(net, t, t.head_in);
    t.scores.resize(net.head.num_classes);
    forward_dense(net.head, t.head_in, t.scores);
}

inline std::vector<double> forward_eval(const Network& net, std::span<const double> x) {
    ForwardTrace t;
    forward(net, x, false, nullptr, t);
    return t.scores;
}

// Promotes raw channels to f64, z-scores each channel when the config asks
// for it, and interleaves them into the network input vector.
inline void assemble_input(const NetworkConfig& cfg,
                           const std::vector<std::span<const float>>& channels,
                           std::vector<double>& out) {
    if (channels.size() != cfg.data_channels) {
        throw data_error("assemble_input: got " + std::to_string(channels.size()) +
                         " channels, config expects " + std::to_string(cfg.data_channels));
    }
    for (const auto& ch : channels) {
        if (ch.size() != cfg.seg_len) {
            throw data_error("assemble_input: channel length " + std::to_string(ch.size()) +
                             " does not match seg_len " + std::to_string(cfg.seg_len));
        }
    }
    const std::size_t c = cfg.data_channels;
    const std::size_t n = cfg.seg_len;
    out.resize(c * n);
    for (std::size_t ci = 0; ci < c; ++ci) {
        double mean = 0.0, scale = 1.0, shift = 0.0;
        if (cfg.normalize_input) {
            for (float v : channels[ci]) mean += double(v);
            mean /= double(n);
            double var = 0.0;
            for (float v : channels[ci]) {
                const double d = double(v) - mean;
                var += d * d;
            }
            var /= double(n);
            const double sd = std::sqrt(var);
            scale = sd > 1e-12 ? 1.0 / sd : 0.0;
            shift = mean;
        }
        for (std::size_t ti = 0; ti < n; ++ti) {
            out[ti * c + ci] = (double(channels[ci][ti]) - shift) * scale;
        }
    }
}

}  // namespace tisc
