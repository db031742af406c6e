#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>

#include "tisc/common.hpp"

namespace tisc {

namespace detail {

inline const std::array<std::uint32_t, 256>& crc32_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

}  // namespace detail

// standard reflected CRC-32 (polynomial 0xEDB88320)
inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    std::uint32_t c = 0xFFFFFFFFu;
    const auto& table = detail::crc32_table();
    for (std::uint8_t b : bytes) c = table[(c ^ b) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

inline std::uint32_t crc32_str(const std::string& s) {
    return crc32(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// Little-endian byte composition, independent of host endianness.
struct ByteWriter {
    std::string buf;

    void u8(std::uint8_t v) { buf.push_back(char(v)); }
    void u16(std::uint16_t v) {
        u8(std::uint8_t(v));
        u8(std::uint8_t(v >> 8));
    }
    void u32(std::uint32_t v) {
        u16(std::uint16_t(v));
        u16(std::uint16_t(v >> 16));
    }
    void u64(std::uint64_t v) {
        u32(std::uint32_t(v));
        u32(std::uint32_t(v >> 32));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::string& s) { buf.append(s); }
};

struct ByteReader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
    std::string what;  // used in truncation messages

    explicit ByteReader(std::span<const std::uint8_t> d, std::string w)
        : data(d), what(std::move(w)) {}

    std::size_t remaining() const { return data.size() - pos; }

    void need(std::size_t n) const {
        if (remaining() < n) {
            throw data_error(what + ": truncated file (need " + std::to_string(n) +
                             " more bytes, have " + std::to_string(remaining()) + ")");
        }
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint16_t u16() {
        const std::uint16_t a = u8();
        return std::uint16_t(a | (std::uint16_t(u8()) << 8));
    }
    std::uint32_t u32() {
        const std::uint32_t a = u16();
        return a | (std::uint32_t(u16()) << 16);
    }
    std::uint64_t u64() {
        const std::uint64_t a = u32();
        return a | (std::uint64_t(u32()) << 32);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string out(reinterpret_cast<const char*>(data.data() + pos), n);
        pos += n;
        return out;
    }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file for reading: " + path);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw data_error("read failed: " + path);
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot open file for writing: " + path);
    out.write(content.data(), std::streamsize(content.size()));
    if (!out) throw data_error("write failed: " + path);
}

// shortest text that round-trips an IEEE double exactly
inline std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace tisc
