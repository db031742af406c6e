#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "tisc/network.hpp"

namespace tisc {

// Parameter and MAC accounting. MACs count multiplications only (bias adds
// excluded). Active parameters are the learnable slots; stored parameters
// include the zero placeholders that pad the input layer's flat weight array
// below 2^lambda_min - 1.
struct LayerCost {
    std::string layer;
    std::size_t macs = 0;
};

struct CostReport {
    std::size_t active_params = 0;
    std::size_t stored_params = 0;
    std::size_t macs_total = 0;
    std::size_t activations = 0;  // computed tree nodes across all layers and channels
    std::vector<LayerCost> macs_per_layer;
};

inline CostReport count_costs(const NetworkConfig& cfg) {
    cfg.validate();
    const std::size_t L = cfg.interleaved_length();
    const std::size_t tc = cfg.tisc_channels;
    CostReport r;

    // input layer: each scale touches every interleaved sample exactly once,
    // so its MACs are L * |scales| per tisc channel
    std::size_t input_active = 0;
    for (int l = cfg.input_scales.lambda_min; l <= cfg.input_scales.lambda_max; ++l) {
        input_active += (std::size_t(1) << l) + 1;
        r.activations += tc * (L >> l);
    }
    const std::size_t input_stored =
        TiScInputLayer::weight_store_size(cfg.input_scales) + std::size_t(cfg.input_scales.count());
    const std::size_t input_macs = L * std::size_t(cfg.input_scales.count());
    r.active_params += tc * input_active;
    r.stored_params += tc * input_stored;
    r.macs_total += tc * input_macs;
    r.macs_per_layer.push_back({"input", tc * input_macs});

    ScaleRange prev = cfg.input_scales;
    for (std::size_t hi = 0; hi < cfg.hidden_stack.size(); ++hi) {
        const ScaleRange& out = cfg.hidden_stack[hi];
        std::size_t params = 0, macs = 0;
        for (int lh = out.lambda_min; lh <= out.lambda_max; ++lh) {
            const std::size_t k = hidden_kernel_size(prev, lh);
            params += k + 1;
            macs += (L >> lh) * k;
            r.activations += tc * (L >> lh);
        }
        r.active_params += tc * params;
        r.stored_params += tc * params;
        r.macs_total += tc * macs;
        r.macs_per_layer.push_back({"hidden" + std::to_string(hi), tc * macs});
        prev = out;
    }

    const std::size_t head_in = cfg.head_inputs_per_channel() * tc;
    const std::size_t head_params = head_in * cfg.num_classes + cfg.num_classes;
    const std::size_t head_macs = head_in * cfg.num_classes;
    r.active_params += head_params;
    r.stored_params += head_params;
    r.macs_total += head_macs;
    r.macs_per_layer.push_back({"head", head_macs});
    return r;
}

inline void to_json(nlohmann::json& j, const CostReport& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerCost& l : r.macs_per_layer) {
        layers.push_back({{"layer", l.layer}, {"macs", l.macs}});
    }
    j = nlohmann::json{{"schema", "tisc-cost-v1"},
                       {"active_params", r.active_params},
                       {"stored_params", r.stored_params},
                       {"macs_total", r.macs_total},
                       {"activations", r.activations},
                       {"macs_per_layer", layers}};
}

}  // namespace tisc
