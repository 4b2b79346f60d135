#pragma once

// Classic pcap (not pcapng) with radiotap link type carrying VHT compressed
// beamforming action frames.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bitstream.hpp"
#include "capture.hpp"
#include "error.hpp"

namespace bfmresp {

inline constexpr std::uint32_t kLinkTypeRadiotap = 127;
inline constexpr std::uint8_t kCategoryVht = 21;
inline constexpr std::uint8_t kVhtActionCompressedBeamforming = 0;

/// Source/destination allowlists. An empty list accepts every address.
struct MacFilter {
    std::vector<MacAddress> sources;
    std::vector<MacAddress> dests;

    bool accepts(const MacAddress& src, const MacAddress& dst) const {
        auto allowed = [](const std::vector<MacAddress>& list, const MacAddress& m) {
            return list.empty() || std::find(list.begin(), list.end(), m) != list.end();
        };
        return allowed(sources, src) && allowed(dests, dst);
    }
};

/// Decoded VHT MIMO Control field.
struct VhtMimoControl {
    int nc = 1;              // columns (streams)
    int nr = 1;              // rows (beamformer antennas)
    int channel_width = 0;   // 0: 20, 1: 40, 2: 80, 3: 160 MHz
    int grouping = 0;
    bool codebook = false;
    bool multi_user = false;
    int remaining_segments = 0;
    bool first_segment = true;
    int sounding_token = 0;

    static VhtMimoControl decode(std::uint32_t raw) {
        VhtMimoControl c;
        c.nc = static_cast<int>(raw & 0x7) + 1;
        c.nr = static_cast<int>((raw >> 3) & 0x7) + 1;
        c.channel_width = static_cast<int>((raw >> 6) & 0x3);
        c.grouping = static_cast<int>((raw >> 8) & 0x3);
        c.codebook = (raw >> 10) & 1;
        c.multi_user = (raw >> 11) & 1;
        c.remaining_segments = static_cast<int>((raw >> 12) & 0x7);
        c.first_segment = (raw >> 15) & 1;
        c.sounding_token = static_cast<int>((raw >> 18) & 0x3f);
        return c;
    }

    std::uint32_t encode() const {
        return static_cast<std::uint32_t>(nc - 1) | static_cast<std::uint32_t>(nr - 1) << 3 |
               static_cast<std::uint32_t>(channel_width) << 6 |
               static_cast<std::uint32_t>(grouping) << 8 |
               static_cast<std::uint32_t>(codebook) << 10 |
               static_cast<std::uint32_t>(multi_user) << 11 |
               static_cast<std::uint32_t>(remaining_segments) << 12 |
               static_cast<std::uint32_t>(first_segment) << 15 |
               static_cast<std::uint32_t>(sounding_token) << 18;
    }

    QuantizationConfig quantization() const {
        return QuantizationConfig::from_codebook(multi_user, codebook);
    }
};

namespace detail {

// Bounds-checked cursor; every out-of-range read yields nullopt.
class ByteCursor {
public:
    explicit ByteCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

    bool skip(std::size_t n) {
        if (n > remaining()) return false;
        pos_ += n;
        return true;
    }

    std::optional<std::span<const std::uint8_t>> take(std::size_t n) {
        if (n > remaining()) return std::nullopt;
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::optional<std::uint32_t> le(std::size_t n) {
        auto s = take(n);
        if (!s) return std::nullopt;
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint32_t>((*s)[i]) << (8 * i);
        return v;
    }

    std::optional<MacAddress> mac() {
        auto s = take(6);
        if (!s) return std::nullopt;
        MacAddress m;
        std::copy(s->begin(), s->end(), m.begin());
        return m;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

// Radiotap: returns the header length and whether the frame carries a
// trailing FCS, or a skip reason.
struct RadiotapInfo {
    std::size_t length = 0;
    bool has_fcs = false;
};

inline std::optional<RadiotapInfo> parse_radiotap(std::span<const std::uint8_t> pkt,
                                                  std::string& reason) {
    ByteCursor cur(pkt);
    auto version = cur.le(1);
    cur.skip(1);
    auto length = cur.le(2);
    if (!version || !length) {
        reason = "truncated radiotap header";
        return std::nullopt;
    }
    if (*version != 0 || *length < 8 || *length > pkt.size()) {
        reason = "malformed radiotap header";
        return std::nullopt;
    }
    RadiotapInfo info{*length, false};
    // Walk the present bitmaps to locate the Flags field (bit 1), which
    // follows the 8-byte aligned TSFT field (bit 0) when present.
    ByteCursor hdr(pkt.first(*length));
    hdr.skip(4);
    std::uint32_t first_present = 0;
    bool first = true;
    while (true) {
        auto word = hdr.le(4);
        if (!word) {
            reason = "malformed radiotap header";
            return std::nullopt;
        }
        if (first) first_present = *word;
        first = false;
        if (!(*word & 0x80000000u)) break;
    }
    if (first_present & 0x2) {
        std::size_t offset = hdr.position();
        if (first_present & 0x1) offset = (offset + 7) / 8 * 8 + 8;
        if (offset >= *length) {
            reason = "malformed radiotap header";
            return std::nullopt;
        }
        info.has_fcs = (pkt[offset] & 0x10) != 0;
    }
    return info;
}

struct ParsedFrame {
    MacAddress source{};
    MacAddress dest{};
    VhtMimoControl control;
    std::span<const std::uint8_t> report;
};

inline std::optional<ParsedFrame> parse_feedback_frame(std::span<const std::uint8_t> frame,
                                                       std::string& reason) {
    ByteCursor cur(frame);
    auto fc = cur.le(2);
    if (!fc) {
        reason = "truncated 802.11 header";
        return std::nullopt;
    }
    const unsigned type = (*fc >> 2) & 0x3;
    const unsigned subtype = (*fc >> 4) & 0xf;
    const unsigned flags = (*fc >> 8) & 0xff;
    if (type != 0 || (subtype != 13 && subtype != 14)) {
        reason = "not an action frame";
        return std::nullopt;
    }
    if (flags & 0x40) {
        reason = "protected frame";
        return std::nullopt;
    }
    ParsedFrame out;
    cur.skip(2);  // duration
    auto a1 = cur.mac();
    auto a2 = cur.mac();
    bool ok = a1 && a2 && cur.skip(6 + 2);  // BSSID, sequence control
    if (ok && (flags & 0x80)) ok = cur.skip(4);  // HT Control
    if (!ok) {
        reason = "truncated 802.11 header";
        return std::nullopt;
    }
    out.dest = *a1;
    out.source = *a2;

    auto category = cur.le(1);
    auto action = cur.le(1);
    if (!category || !action) {
        reason = "truncated action frame";
        return std::nullopt;
    }
    if (*category != kCategoryVht || *action != kVhtActionCompressedBeamforming) {
        reason = "not a VHT compressed beamforming frame";
        return std::nullopt;
    }
    auto mimo = cur.le(3);
    if (!mimo) {
        reason = "truncated VHT MIMO control";
        return std::nullopt;
    }
    out.control = VhtMimoControl::decode(*mimo);
    if (out.control.nc > out.control.nr) {
        reason = "malformed VHT MIMO control";
        return std::nullopt;
    }
    if (!cur.skip(static_cast<std::size_t>(out.control.nc))) {  // average SNR per stream
        reason = "truncated beamforming report";
        return std::nullopt;
    }
    out.report = *cur.take(cur.remaining());
    return out;
}

} // namespace detail

/// Parses an in-memory pcap image.
inline CaptureStream parse_pcap(std::span<const std::uint8_t> bytes, const MacFilter& filter = {},
                                const std::string& source = "<memory>") {
    detail::ByteCursor cur(bytes);
    auto magic = cur.le(4);
    if (!magic) throw ParseError(source + ": missing pcap global header");
    bool swapped = false;
    bool nanosecond = false;
    switch (*magic) {
    case 0xa1b2c3d4: break;
    case 0xa1b23c4d: nanosecond = true; break;
    case 0xd4c3b2a1: swapped = true; break;
    case 0x4d3cb2a1: swapped = nanosecond = true; break;
    default: throw ParseError(source + ": not a classic pcap file (bad magic)");
    }
    auto u32 = [&]() -> std::optional<std::uint32_t> {
        auto v = cur.le(4);
        if (v && swapped) return detail::byteswap32(*v);
        return v;
    };
    if (!cur.skip(4 + 4 + 4 + 4)) throw ParseError(source + ": truncated pcap global header");
    auto link = u32();
    if (!link) throw ParseError(source + ": truncated pcap global header");
    if (*link != kLinkTypeRadiotap)
        throw ParseError(source + ": unsupported link type " + std::to_string(*link) +
                         " (expected radiotap, 127)");

    CaptureStream stream;
    stream.metadata.source_file = source;
    std::optional<double> first_time;
    while (cur.remaining() > 0) {
        auto ts_sec = u32();
        auto ts_frac = u32();
        auto incl = u32();
        auto orig = u32();
        if (!ts_sec || !ts_frac || !incl || !orig) {
            stream.metadata.skip("truncated packet");
            break;
        }
        auto pkt = cur.take(*incl);
        if (!pkt) {
            stream.metadata.skip("truncated packet");
            break;
        }

        std::string reason;
        auto radiotap = detail::parse_radiotap(*pkt, reason);
        if (!radiotap) {
            stream.metadata.skip(reason);
            continue;
        }
        auto frame = pkt->subspan(radiotap->length);
        if (radiotap->has_fcs) {
            if (frame.size() < 4) {
                stream.metadata.skip("truncated 802.11 header");
                continue;
            }
            frame = frame.first(frame.size() - 4);
        }
        auto parsed = detail::parse_feedback_frame(frame, reason);
        if (!parsed) {
            stream.metadata.skip(reason);
            continue;
        }
        if (!filter.accepts(parsed->source, parsed->dest)) {
            stream.metadata.skip("address filtered");
            continue;
        }

        BfmFrameRecord rec;
        rec.source = parsed->source;
        rec.dest = parsed->dest;
        rec.n_rows = parsed->control.nr;
        rec.n_cols = parsed->control.nc;
        try {
            auto unpacked = unpack_angle_bitstream(parsed->report, rec.n_rows, rec.n_cols,
                                                   parsed->control.quantization());
            rec.angle_sets = std::move(unpacked.angle_sets);
        } catch (const TruncatedReportError&) {
            stream.metadata.skip("truncated beamforming report");
            continue;
        }
        rec.n_subcarriers = static_cast<int>(rec.angle_sets.size());
        if (!stream.records.empty()) {
            const BfmFrameRecord& ref = stream.records.front();
            if (rec.n_rows != ref.n_rows || rec.n_cols != ref.n_cols ||
                rec.n_subcarriers != ref.n_subcarriers || rec.config() != ref.config()) {
                stream.metadata.skip("shape differs from first accepted frame");
                continue;
            }
        }
        const double scale = nanosecond ? 1e-9 : 1e-6;
        const double t = static_cast<double>(*ts_sec) + static_cast<double>(*ts_frac) * scale;
        if (!first_time) first_time = t;
        rec.timestamp = t;
        stream.records.push_back(std::move(rec));
    }

    if (stream.records.empty()) {
        std::string reasons;
        for (const auto& [why, n] : stream.metadata.skip_reasons)
            reasons += (reasons.empty() ? "" : ", ") + why + " x" + std::to_string(n);
        throw EmptyCaptureError(source + ": no decodable beamforming feedback frames (" +
                                std::to_string(stream.metadata.skipped_frames) + " skipped" +
                                (reasons.empty() ? "" : ": " + reasons) + ")");
    }
    stream.sort_by_time();
    const double t0 = stream.records.front().timestamp;
    for (auto& r : stream.records) r.timestamp -= t0;
    stream.metadata.parsed_frames = stream.records.size();
    return stream;
}

inline CaptureStream read_pcap(const std::string& path, const MacFilter& filter = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    if (is.bad()) throw IoError("read of " + path + " failed");
    return parse_pcap(bytes, filter, path);
}

struct PcapWriteOptions {
    bool nanosecond = false;
    int channel_width = 2;  // 80 MHz
    std::uint8_t average_snr = 0x40;
};

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::pair<bool, bool> codebook_bits(QuantizationConfig q) {
    for (bool mu : {false, true})
        for (bool cb : {false, true})
            if (QuantizationConfig::from_codebook(mu, cb) == q) return {mu, cb};
    throw ShapeError("quantization (b_phi=" + std::to_string(q.b_phi) +
                     ", b_psi=" + std::to_string(q.b_psi) +
                     ") has no VHT codebook encoding");
}

} // namespace detail

/// Serializes records as radiotap + VHT compressed beamforming action frames.
inline std::vector<std::uint8_t> build_pcap(const CaptureStream& stream,
                                            const PcapWriteOptions& options = {}) {
    using detail::put_le;
    std::vector<std::uint8_t> out;
    put_le(out, options.nanosecond ? 0xa1b23c4d : 0xa1b2c3d4, 4);
    put_le(out, 2, 2);
    put_le(out, 4, 2);
    put_le(out, 0, 4);
    put_le(out, 0, 4);
    put_le(out, 65535, 4);
    put_le(out, kLinkTypeRadiotap, 4);

    std::uint8_t token = 0;
    for (const BfmFrameRecord& r : stream.records) {
        r.validate();
        const auto [mu, cb] = detail::codebook_bits(r.config());
        VhtMimoControl ctl;
        ctl.nc = r.n_cols;
        ctl.nr = r.n_rows;
        ctl.channel_width = options.channel_width;
        ctl.codebook = cb;
        ctl.multi_user = mu;
        ctl.sounding_token = token++ & 0x3f;

        std::vector<std::uint8_t> pkt;
        // radiotap: version, pad, length 8, no present fields
        put_le(pkt, 0, 2);
        put_le(pkt, 8, 2);
        put_le(pkt, 0, 4);
        // 802.11 management header, subtype Action
        put_le(pkt, 0x00d0, 2);
        put_le(pkt, 0, 2);
        pkt.insert(pkt.end(), r.dest.begin(), r.dest.end());
        pkt.insert(pkt.end(), r.source.begin(), r.source.end());
        pkt.insert(pkt.end(), r.dest.begin(), r.dest.end());
        put_le(pkt, 0, 2);
        pkt.push_back(kCategoryVht);
        pkt.push_back(kVhtActionCompressedBeamforming);
        put_le(pkt, ctl.encode(), 3);
        for (int s = 0; s < r.n_cols; ++s) pkt.push_back(options.average_snr);
        const auto report = pack_angle_bitstream(r.angle_sets);
        pkt.insert(pkt.end(), report.begin(), report.end());

        const double scale = options.nanosecond ? 1e9 : 1e6;
        const auto ticks = static_cast<std::uint64_t>(std::llround(r.timestamp * scale));
        const auto per_sec = static_cast<std::uint64_t>(scale);
        put_le(out, static_cast<std::uint32_t>(ticks / per_sec), 4);
        put_le(out, static_cast<std::uint32_t>(ticks % per_sec), 4);
        put_le(out, static_cast<std::uint32_t>(pkt.size()), 4);
        put_le(out, static_cast<std::uint32_t>(pkt.size()), 4);
        out.insert(out.end(), pkt.begin(), pkt.end());
    }
    return out;
}

inline void write_pcap(const CaptureStream& stream, const std::string& path,
                       const PcapWriteOptions& options = {}) {
    const auto bytes = build_pcap(stream, options);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write to " + path + " failed");
}

} // namespace bfmresp
