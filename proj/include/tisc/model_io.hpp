#pragma once

#include <string>

#include "json.hpp"
#include "tisc/io_util.hpp"
#include "tisc/network.hpp"

namespace tisc {

// Model file layout (all integers little-endian):
//   "TSCM" | u16 format version | u32 json length | json config block |
//   f64 parameter blob | u32 CRC-32 over everything before it
//
// The json block holds {"config": NetworkConfig, "seed": N, "support_order": V}.
// The blob stores full arrays including placeholder zeros, per tisc channel:
// input weights, input biases, then per hidden layer each kernel (scale
// ascending) followed by its biases; finally head weights then head biases.
inline constexpr std::uint16_t kModelFormatVersion = 1;

namespace detail {

template <class Fn>
inline void walk_stored_params(const Network& net, Fn&& fn) {
    for (const TiScChannel& ch : net.channels) {
        for (double v : ch.input.weights) fn(v);
        for (double v : ch.input.biases) fn(v);
        for (const TiScHiddenLayer& h : ch.hidden) {
            for (const auto& k : h.kernels) {
                for (double v : k) fn(v);
            }
            for (double v : h.biases) fn(v);
        }
    }
    for (double v : net.head.weights) fn(v);
    for (double v : net.head.biases) fn(v);
}

}  // namespace detail

inline std::string serialize_model(const Network& net) {
    nlohmann::json meta{{"config", net.config},
                        {"seed", net.seed},
                        {"support_order", kSupportOrderVersion}};
    const std::string json_text = meta.dump();

    ByteWriter w;
    w.bytes("TSCM");
    w.u16(kModelFormatVersion);
    w.u32(std::uint32_t(json_text.size()));
    w.bytes(json_text);
    detail::walk_stored_params(net, [&](double v) { w.f64(v); });
    w.u32(crc32_str(w.buf));
    return w.buf;
}

inline void save(const Network& net, const std::string& path) {
    write_file(path, serialize_model(net));
}

inline Network deserialize_model(const std::string& blob, const std::string& origin) {
    ByteReader r(std::span<const std::uint8_t>(
                     reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size()),
                 origin);
    if (r.bytes(4) != "TSCM") throw data_error(origin + ": not a TSCM model file");
    const std::uint16_t version = r.u16();
    if (version != kModelFormatVersion) {
        throw data_error(origin + ": unsupported model format version " +
                         std::to_string(version) + " (expected " +
                         std::to_string(kModelFormatVersion) + ")");
    }
    const std::uint32_t json_len = r.u32();
    const std::string json_text = r.bytes(json_len);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(origin + ": bad config block: " + e.what());
    }
    const std::uint32_t support = meta.value("support_order", std::uint32_t(0));
    if (support != kSupportOrderVersion) {
        throw data_error(origin + ": model was written with support ordering version " +
                         std::to_string(support) + ", this build uses version " +
                         std::to_string(kSupportOrderVersion));
    }

    NetworkConfig cfg;
    try {
        cfg = meta.at("config").get<NetworkConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(origin + ": bad config block: " + e.what());
    }
    cfg.validate();

    Network net = build(cfg, meta.value("seed", std::uint64_t(0)));
    // overwrite the freshly built parameters with the stored blob
    std::size_t expected = 0;
    detail::walk_stored_params(net, [&](double) { ++expected; });
    r.need(expected * 8 + 4);
    if (r.remaining() != expected * 8 + 4) {
        throw data_error(origin + ": parameter blob size mismatch");
    }

    const std::string body(blob.data(), blob.size() - 4);
    ByteReader tail(std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(blob.data()) + blob.size() - 4, 4),
                    origin);
    if (tail.u32() != crc32_str(body)) {
        throw data_error(origin + ": checksum mismatch, file is corrupt");
    }

    for (TiScChannel& ch : net.channels) {
        for (double& v : ch.input.weights) v = r.f64();
        for (double& v : ch.input.biases) v = r.f64();
        for (TiScHiddenLayer& h : ch.hidden) {
            for (auto& k : h.kernels) {
                for (double& v : k) v = r.f64();
            }
            for (double& v : h.biases) v = r.f64();
        }
    }
    for (double& v : net.head.weights) v = r.f64();
    for (double& v : net.head.biases) v = r.f64();

    // placeholders must still be zero
    for (const TiScChannel& ch : net.channels) {
        const std::size_t lo = (std::size_t(1) << ch.input.scales.lambda_min) - 1;
        for (std::size_t i = 0; i < lo; ++i) {
            if (ch.input.weights[i] != 0.0) {
                throw data_error(origin + ": nonzero placeholder weight at slot " +
                                 std::to_string(i));
            }
        }
    }
    return net;
}

inline Network load(const std::string& path) {
    return deserialize_model(read_file(path), path);
}

}  // namespace tisc
