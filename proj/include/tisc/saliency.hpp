#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "tisc/backprop.hpp"
#include "tisc/source.hpp"
#include "tisc/threading.hpp"

namespace tisc {

// GradCAM adapted to the tree layout: every scale is a width-one feature map,
// so there is no channel pooling step and the relevance of node (scale,
// offset) degenerates to max(0, activation * d logit_c / d activation).
// Attribution targets the pre-softmax logit of the chosen class. The abs_grad
// mode reports plain |gradient| instead.
enum class SaliencyMode { grad_x_act, abs_grad };

struct SaliencyMap {
    std::size_t channel = 0;
    std::size_t layer = 0;  // 0 = input layer
    ScaleRange scales;
    std::size_t segment_length = 0;
    std::vector<double> values;  // tree-shaped, nonnegative
    std::size_t target_class = 0;
    std::string normalization = "raw";  // raw | max-1
};

namespace detail {

// reverse sweep from one class logit, capturing d logit / d out per layer
inline void gradcam_backward(const Network& net, const ForwardTrace& t, std::size_t target,
                             std::vector<std::vector<EmbeddingTree>>& dtrees,
                             BackpropBuffers& ws, NetworkGrads& sink) {
    std::vector<double> dscores(net.head.num_classes, 0.0);
    dscores[target] = 1.0;
    ws.ensure(net);
    std::fill(ws.dhead_in.begin(), ws.dhead_in.end(), 0.0);
    sink.zero();
    backward_dense(net.head, t.head_in, dscores, sink.head, ws.dhead_in);

    dtrees.resize(net.channels.size());
    std::size_t cursor = 0;
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        const ChannelTrace& ct = t.channels[ch];
        const std::size_t layers = net.layers_per_channel();
        dtrees[ch].resize(layers);

        EmbeddingTree& dlast = dtrees[ch][layers - 1];
        const EmbeddingTree& last_out = ct.layers[layers - 1].out;
        dlast.reset(last_out.segment_length, last_out.scales);
        for (int l = last_out.scales.lambda_min; l <= last_out.scales.lambda_max; ++l) {
            const std::size_t base = scale_base(last_out.segment_length, l);
            const std::size_t rows = windows_at(last_out.segment_length, l);
            for (std::size_t i = 0; i < rows; ++i) dlast.values[base + i] = ws.dhead_in[cursor++];
        }

        for (std::size_t li = layers; li-- > 1;) {
            const LayerTrace& lt = ct.layers[li];
            const EmbeddingTree& below = ct.layers[li - 1].out;
            EmbeddingTree& dbelow = dtrees[ch][li - 1];
            dbelow.reset(below.segment_length, below.scales);
            backward_hidden(net.channels[ch].hidden[li - 1], below, lt.pre, dtrees[ch][li],
                            sink.channels[ch].hidden[li - 1], &dbelow);
        }
    }
}

}  // namespace detail

// One map per (tisc channel, layer), from a single eval-mode backward pass.
inline std::vector<SaliencyMap> gradcam(const Network& net, std::span<const double> x,
                                        std::size_t target_class,
                                        SaliencyMode mode = SaliencyMode::grad_x_act,
                                        bool normalize_max1 = false) {
    if (target_class >= net.head.num_classes) {
        throw std::out_of_range("gradcam: class " + std::to_string(target_class) +
                                " out of range for " + std::to_string(net.head.num_classes) +
                                " classes");
    }
    ForwardTrace t;
    forward(net, x, false, nullptr, t);

    std::vector<std::vector<EmbeddingTree>> dtrees;
    BackpropBuffers ws;
    NetworkGrads sink = NetworkGrads::like(net);
    detail::gradcam_backward(net, t, target_class, dtrees, ws, sink);

    std::vector<SaliencyMap> maps;
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        for (std::size_t li = 0; li < net.layers_per_channel(); ++li) {
            const EmbeddingTree& out = t.channels[ch].layers[li].out;
            const EmbeddingTree& grad = dtrees[ch][li];
            SaliencyMap map;
            map.channel = ch;
            map.layer = li;
            map.scales = out.scales;
            map.segment_length = out.segment_length;
            map.target_class = target_class;
            map.values.assign(out.size(), 0.0);
            for (std::size_t j = out.active_begin(); j < out.active_end(); ++j) {
                map.values[j] = mode == SaliencyMode::grad_x_act
                                    ? std::max(0.0, out.values[j] * grad.values[j])
                                    : std::abs(grad.values[j]);
            }
            if (normalize_max1) {
                const double peak = *std::max_element(map.values.begin(), map.values.end());
                if (peak > 0.0) {
                    for (double& v : map.values) v /= peak;
                }
                map.normalization = "max-1";
            }
            maps.push_back(std::move(map));
        }
    }
    return maps;
}

// Per-scale relevance totals over a dataset; additive over shards and
// independent of segment order (up to float summation noise).
struct CumulativeSaliency {
    std::vector<double> per_scale;  // indexed by scale exponent
    std::size_t samples = 0;
};

enum class ClassMode { predicted, true_label };

inline CumulativeSaliency cumulative(const Network& net, const SegmentDataset& ds,
                                     ClassMode class_mode,
                                     SaliencyMode mode = SaliencyMode::grad_x_act,
                                     unsigned threads = 0) {
    if (ds.n_segments == 0) throw data_error("cumulative saliency: empty dataset");
    check_compatible(net.config, ds);
    SegmentSource src(ds, net.config);

    const std::size_t n_scales = std::size_t(ilog2(net.config.interleaved_length())) + 1;
    const std::size_t n_blocks = block_count(ds.n_segments, detail::kGradBlock);
    std::vector<std::vector<double>> partial(n_blocks, std::vector<double>(n_scales, 0.0));

    parallel_blocks(ds.n_segments, detail::kGradBlock, threads,
                    [&](std::size_t b, std::size_t begin, std::size_t end, unsigned) {
                        std::vector<double> x;
                        for (std::size_t s = begin; s < end; ++s) {
                            src.input(s, x);
                            std::size_t target = src.label(s);
                            if (class_mode == ClassMode::predicted) {
                                target = argmax(forward_eval(net, x));
                            }
                            for (const SaliencyMap& map : gradcam(net, x, target, mode)) {
                                for (int l = map.scales.lambda_min; l <= map.scales.lambda_max;
                                     ++l) {
                                    const std::size_t base = scale_base(map.segment_length, l);
                                    const std::size_t rows = windows_at(map.segment_length, l);
                                    double sum = 0.0;
                                    for (std::size_t i = 0; i < rows; ++i) {
                                        sum += map.values[base + i];
                                    }
                                    partial[b][std::size_t(l)] += sum;
                                }
                            }
                        }
                    });

    CumulativeSaliency out;
    out.per_scale.assign(n_scales, 0.0);
    out.samples = ds.n_segments;
    for (const auto& p : partial) {
        for (std::size_t l = 0; l < n_scales; ++l) out.per_scale[l] += p[l];
    }
    return out;
}

inline int argmax_scale(const CumulativeSaliency& c) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < c.per_scale.size(); ++l) {
        if (c.per_scale[l] > c.per_scale[best]) best = l;
    }
    return int(best);
}

// columns: layer, scale, offset, t_start_sample, t_end_sample, relevance
inline std::string saliency_map_csv(const SaliencyMap& map) {
    std::ostringstream out;
    out << "layer,scale,offset,t_start_sample,t_end_sample,relevance\n";
    for (int l = map.scales.lambda_min; l <= map.scales.lambda_max; ++l) {
        const std::size_t rows = windows_at(map.segment_length, l);
        for (std::size_t i = 0; i < rows; ++i) {
            const SampleInterval f = receptive_field(map.segment_length, l, i);
            out << map.layer << ',' << l << ',' << i << ',' << f.begin << ',' << f.end << ','
                << fmt_g17(map.values[node_index(map.segment_length, l, i)]) << '\n';
        }
    }
    return out.str();
}

// columns: scale, total, mean
inline std::string cumulative_csv(const CumulativeSaliency& c) {
    std::ostringstream out;
    out << "scale,total,mean\n";
    for (std::size_t l = 1; l < c.per_scale.size(); ++l) {
        out << l << ',' << fmt_g17(c.per_scale[l]) << ','
            << fmt_g17(c.per_scale[l] / double(c.samples)) << '\n';
    }
    return out.str();
}

// One CSV per tisc channel holding that channel's input-layer waveforms.
// Values render losslessly, so a re-import reproduces the weights bit-exactly.
inline std::vector<std::string> export_waveforms(const Network& net,
                                                 const std::string& out_dir) {
    std::vector<std::string> written;
    for (std::size_t ch = 0; ch < net.channels.size(); ++ch) {
        const TiScInputLayer& input = net.channels[ch].input;
        std::ostringstream out;
        out << "scale,tap,weight\n";
        for (int l = input.scales.lambda_min; l <= input.scales.lambda_max; ++l) {
            const WeightSlice ws = weight_slice(input, l);
            for (std::size_t k = 0; k < ws.size(); ++k) {
                out << l << ',' << k << ',' << fmt_g17(input.weights[ws.begin + k]) << '\n';
            }
        }
        const std::string path = out_dir + "/waveforms_ch" + std::to_string(ch) + ".csv";
        write_file(path, out.str());
        written.push_back(path);
    }
    return written;
}

}  // namespace tisc
