#pragma once

#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "tisc/io_util.hpp"

namespace tisc {

// Labelled fixed-length multi-channel segments. Data is stored f32,
// segment-major then channel-major then time:
// data[(seg * n_channels + ch) * seg_len + t].
struct SegmentDataset {
    std::size_t n_segments = 0;
    std::size_t n_channels = 0;
    std::size_t seg_len = 0;  // per channel
    std::size_t n_classes = 0;
    float sample_rate = 0.0f;
    std::vector<std::uint16_t> labels;
    std::vector<float> data;

    std::span<const float> channel(std::size_t seg, std::size_t ch) const {
        return std::span<const float>(data.data() + (seg * n_channels + ch) * seg_len, seg_len);
    }

    void validate() const {
        if (n_channels == 0 || !is_pow2(n_channels)) {
            throw data_error("dataset: channel count " + std::to_string(n_channels) +
                             " is not a power of two; add all-zero dummy channels to pad");
        }
        if (!is_pow2(n_channels * seg_len)) {
            throw data_error("dataset: interleaved segment length " +
                             std::to_string(n_channels * seg_len) + " is not a power of two");
        }
        if (labels.size() != n_segments) {
            throw data_error("dataset: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(n_segments) + " segments");
        }
        if (data.size() != n_segments * n_channels * seg_len) {
            throw data_error("dataset: data length " + std::to_string(data.size()) +
                             " does not match n_segments*n_channels*seg_len");
        }
        for (std::uint16_t l : labels) {
            if (l >= n_classes) {
                throw data_error("dataset: label " + std::to_string(l) + " >= n_classes " +
                                 std::to_string(n_classes));
            }
        }
    }
};

// TSEG container: "TSG1" | u16 version | u32 n_segments | u32 n_channels |
// u32 seg_len | u32 n_classes | f32 sample_rate | u16 labels[n_segments] |
// f32 data[n_segments*n_channels*seg_len] | u32 CRC-32 trailer.
inline constexpr std::uint16_t kTsegFormatVersion = 1;

inline std::string serialize_tseg(const SegmentDataset& ds) {
    ds.validate();
    ByteWriter w;
    w.bytes("TSG1");
    w.u16(kTsegFormatVersion);
    w.u32(std::uint32_t(ds.n_segments));
    w.u32(std::uint32_t(ds.n_channels));
    w.u32(std::uint32_t(ds.seg_len));
    w.u32(std::uint32_t(ds.n_classes));
    w.f32(ds.sample_rate);
    for (std::uint16_t l : ds.labels) w.u16(l);
    for (float v : ds.data) w.f32(v);
    w.u32(crc32_str(w.buf));
    return w.buf;
}

inline void write_tseg(const SegmentDataset& ds, const std::string& path) {
    write_file(path, serialize_tseg(ds));
}

inline SegmentDataset deserialize_tseg(const std::string& blob, const std::string& origin) {
    ByteReader r(std::span<const std::uint8_t>(
                     reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size()),
                 origin);
    if (r.bytes(4) != "TSG1") throw data_error(origin + ": not a TSEG file");
    const std::uint16_t version = r.u16();
    if (version != kTsegFormatVersion) {
        throw data_error(origin + ": unsupported TSEG version " + std::to_string(version));
    }
    SegmentDataset ds;
    ds.n_segments = r.u32();
    ds.n_channels = r.u32();
    ds.seg_len = r.u32();
    ds.n_classes = r.u32();
    ds.sample_rate = r.f32();

    const std::size_t values = ds.n_segments * ds.n_channels * ds.seg_len;
    const std::size_t expected = ds.n_segments * 2 + values * 4 + 4;
    if (r.remaining() < expected) {
        throw data_error(origin + ": truncated file (header promises " +
                         std::to_string(ds.n_segments) + " segments, payload is short)");
    }
    if (crc32_str(std::string(blob.data(), blob.size() - 4)) !=
        ByteReader(std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(blob.data()) + blob.size() - 4, 4),
                   origin)
            .u32()) {
        throw data_error(origin + ": checksum mismatch, file is corrupt");
    }

    ds.labels.resize(ds.n_segments);
    for (auto& l : ds.labels) l = r.u16();
    ds.data.resize(values);
    for (auto& v : ds.data) v = r.f32();
    ds.validate();
    return ds;
}

inline SegmentDataset read_tseg(const std::string& path) {
    return deserialize_tseg(read_file(path), path);
}

namespace detail {

inline std::vector<float> parse_sample_column(const std::string& path) {
    const std::string text = read_file(path);
    std::vector<float> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        pos = eol + 1;
        // trim
        const std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;  // blank line
        const std::size_t e = line.find_last_not_of(" \t");
        line = line.substr(b, e - b + 1);
        char* end = nullptr;
        const float v = std::strtof(line.c_str(), &end);
        if (end == line.c_str() || *end != '\0') {
            throw data_error(path + ":" + std::to_string(line_no) + ": not a number: '" +
                             line + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

// One CSV file per channel with a single numeric sample per line, plus a
// labels file carrying one integer per segment. Streams are chopped into
// non-overlapping segments of seg_len samples.
inline SegmentDataset import_csv(const std::vector<std::string>& channel_paths,
                                 std::size_t seg_len, const std::string& labels_path,
                                 float sample_rate = 0.0f) {
    if (channel_paths.empty()) throw data_error("import_csv: no channel files");
    if (seg_len == 0) throw data_error("import_csv: seg_len must be positive");

    std::vector<std::vector<float>> channels;
    for (const auto& p : channel_paths) channels.push_back(detail::parse_sample_column(p));
    const std::size_t n = channels[0].size();
    for (std::size_t c = 1; c < channels.size(); ++c) {
        if (channels[c].size() != n) {
            throw data_error("import_csv: channel " + channel_paths[c] + " has " +
                             std::to_string(channels[c].size()) + " samples, expected " +
                             std::to_string(n));
        }
    }
    if (n % seg_len != 0) {
        throw data_error("import_csv: stream length " + std::to_string(n) +
                         " is not a multiple of seg_len " + std::to_string(seg_len));
    }

    SegmentDataset ds;
    ds.n_segments = n / seg_len;
    ds.n_channels = channels.size();
    ds.seg_len = seg_len;
    ds.sample_rate = sample_rate;

    const std::string labels_text = read_file(labels_path);
    std::size_t pos = 0, line_no = 0;
    while (pos < labels_text.size()) {
        std::size_t eol = labels_text.find('\n', pos);
        if (eol == std::string::npos) eol = labels_text.size();
        std::string line = labels_text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        pos = eol + 1;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        char* end = nullptr;
        const long v = std::strtol(line.c_str(), &end, 10);
        if (end == line.c_str() || *end != '\0' || v < 0) {
            throw data_error(labels_path + ":" + std::to_string(line_no) +
                             ": not a class index: '" + line + "'");
        }
        ds.labels.push_back(std::uint16_t(v));
    }
    if (ds.labels.size() != ds.n_segments) {
        throw data_error("import_csv: " + std::to_string(ds.labels.size()) + " labels for " +
                         std::to_string(ds.n_segments) + " segments");
    }
    ds.n_classes = 0;
    for (std::uint16_t l : ds.labels) ds.n_classes = std::max<std::size_t>(ds.n_classes, l + 1);
    if (ds.n_classes < 2) ds.n_classes = 2;

    ds.data.resize(ds.n_segments * ds.n_channels * seg_len);
    for (std::size_t s = 0; s < ds.n_segments; ++s) {
        for (std::size_t c = 0; c < ds.n_channels; ++c) {
            for (std::size_t t = 0; t < seg_len; ++t) {
                ds.data[(s * ds.n_channels + c) * seg_len + t] = channels[c][s * seg_len + t];
            }
        }
    }
    ds.validate();
    return ds;
}

}  // namespace tisc
