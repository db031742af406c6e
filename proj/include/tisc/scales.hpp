#pragma once

#include <cmath>
#include <string>

#include "tisc/common.hpp"

namespace tisc {

// Inclusive range of integer time-scale exponents. A scale l owns
// non-overlapping windows of 2^l interleaved samples.
struct ScaleRange {
    int lambda_min = 1;
    int lambda_max = 1;

    int count() const { return lambda_max - lambda_min + 1; }
    bool contains(int l) const { return l >= lambda_min && l <= lambda_max; }
    bool operator==(const ScaleRange&) const = default;
};

// Scales must stay inside [1, log2(L)] for the segment length they act on,
// and L itself must be a power of two so windows tile exactly.
inline void validate_scales(const ScaleRange& s, std::size_t segment_length,
                            const std::string& what = "scales") {
    if (!is_pow2(segment_length)) {
        throw config_error(what + ": segment length " + std::to_string(segment_length) +
                           " is not a power of two");
    }
    if (s.lambda_min < 1) {
        throw config_error(what + ": lambda_min " + std::to_string(s.lambda_min) +
                           " is below 1");
    }
    if (s.lambda_max < s.lambda_min) {
        throw config_error(what + ": lambda_max " + std::to_string(s.lambda_max) +
                           " is below lambda_min " + std::to_string(s.lambda_min));
    }
    if (s.lambda_max > ilog2(segment_length)) {
        throw config_error(what + ": lambda_max " + std::to_string(s.lambda_max) +
                           " exceeds log2(segment length) = " +
                           std::to_string(ilog2(segment_length)));
    }
}

enum class ActivationKind { relu, tanh, identity };

inline double activate(ActivationKind k, double z) {
    switch (k) {
        case ActivationKind::relu:
            return z > 0.0 ? z : 0.0;
        case ActivationKind::tanh:
            return std::tanh(z);
        case ActivationKind::identity:
            return z;
    }
    return z;
}

// derivative evaluated at the pre-activation
inline double activate_grad(ActivationKind k, double pre) {
    switch (k) {
        case ActivationKind::relu:
            return pre > 0.0 ? 1.0 : 0.0;
        case ActivationKind::tanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        case ActivationKind::identity:
            return 1.0;
    }
    return 1.0;
}

inline const char* to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::relu:
            return "relu";
        case ActivationKind::tanh:
            return "tanh";
        case ActivationKind::identity:
            return "identity";
    }
    return "relu";
}

inline ActivationKind activation_from_string(const std::string& s) {
    if (s == "relu") return ActivationKind::relu;
    if (s == "tanh") return ActivationKind::tanh;
    if (s == "identity") return ActivationKind::identity;
    throw config_error("unknown activation '" + s + "' (expected relu, tanh or identity)");
}

}  // namespace tisc
