#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tisc {

// Error taxonomy mirrored by the CLI exit codes: config=2, data=3, numeric=4.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool is_pow2(std::size_t v) { return v != 0 && std::has_single_bit(v); }

// floor(log2(v)) for v > 0
inline int ilog2(std::size_t v) { return std::bit_width(v) - 1; }

}  // namespace tisc
