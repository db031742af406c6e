#pragma once

#include <cmath>

#include "tisc/backprop.hpp"

namespace tisc {

// running mean of squared gradients, one slot per learnable parameter
struct RmsPropState {
    NetworkGrads sq;

    static RmsPropState like(const Network& net) { return {NetworkGrads::like(net)}; }
};

// adds the L2 weight-decay term 2*l2*p to the accumulated gradient;
// placeholders are outside the active blocks and stay untouched
inline void apply_l2(const Network& net, NetworkGrads& g, double l2) {
    if (l2 == 0.0) return;
    auto params = param_blocks(const_cast<Network&>(net));
    auto grads = grad_blocks(g);
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            grads[b][i] += 2.0 * l2 * params[b][i];
        }
    }
}

// s <- decay*s + (1-decay)*g^2 ; p <- p - lr * g / (sqrt(s) + eps)
inline void rmsprop_step(Network& net, const NetworkGrads& g, RmsPropState& state,
                         double learning_rate, double decay, double epsilon) {
    auto params = param_blocks(net);
    auto grads = grad_blocks(const_cast<NetworkGrads&>(g));
    auto sq = grad_blocks(state.sq);
    if (params.size() != grads.size() || params.size() != sq.size()) {
        throw std::invalid_argument("rmsprop_step: shape mismatch");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size() || params[b].size() != sq[b].size()) {
            throw std::invalid_argument("rmsprop_step: block shape mismatch");
        }
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double gi = grads[b][i];
            sq[b][i] = decay * sq[b][i] + (1.0 - decay) * gi * gi;
            params[b][i] -= learning_rate * gi / (std::sqrt(sq[b][i]) + epsilon);
        }
    }
}

}  // namespace tisc
