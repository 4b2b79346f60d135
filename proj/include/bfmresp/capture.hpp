#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codec.hpp"
#include "error.hpp"

namespace bfmresp {

using MacAddress = std::array<std::uint8_t, 6>;

inline std::string format_mac(const MacAddress& mac) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2],
                  mac[3], mac[4], mac[5]);
    return buf;
}

/// One captured compressed beamforming feedback frame.
struct BfmFrameRecord {
    double timestamp = 0.0;  // seconds since capture start
    MacAddress source{};
    MacAddress dest{};
    int n_rows = 0;
    int n_cols = 0;
    int n_subcarriers = 0;
    std::vector<AngleSet> angle_sets;  // one per subcarrier, ascending

    QuantizationConfig config() const {
        return angle_sets.empty() ? QuantizationConfig{} : angle_sets.front().config;
    }

    void validate() const {
        validate_dims(n_rows, n_cols);
        if (static_cast<std::size_t>(n_subcarriers) != angle_sets.size())
            throw ShapeError("record declares " + std::to_string(n_subcarriers) +
                             " subcarriers but carries " + std::to_string(angle_sets.size()));
        for (const AngleSet& a : angle_sets) {
            if (a.n_rows != n_rows || a.n_cols != n_cols || a.config != config())
                throw ShapeError("angle sets of one record must share shape and quantization");
            a.validate();
        }
    }
};

struct CaptureMetadata {
    std::string source_file;
    std::size_t parsed_frames = 0;
    std::size_t skipped_frames = 0;
    std::map<std::string, std::size_t> skip_reasons;
    /// Nominal capture length in seconds, when the producer knows it.
    std::optional<double> duration;

    void skip(const std::string& reason) {
        ++skipped_frames;
        ++skip_reasons[reason];
    }
};

struct CaptureStream {
    std::vector<BfmFrameRecord> records;
    CaptureMetadata metadata;

    /// Span of time the capture covers. Falls back to the last timestamp plus
    /// the median frame interval when no nominal duration was recorded.
    double duration() const {
        if (metadata.duration) return *metadata.duration;
        if (records.empty()) return 0.0;
        if (records.size() == 1) return records.front().timestamp;
        std::vector<double> gaps;
        gaps.reserve(records.size() - 1);
        for (std::size_t i = 1; i < records.size(); ++i)
            gaps.push_back(records[i].timestamp - records[i - 1].timestamp);
        auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
        std::nth_element(gaps.begin(), mid, gaps.end());
        return records.back().timestamp + *mid;
    }

    void sort_by_time() {
        std::stable_sort(records.begin(), records.end(),
                         [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    }
};

} // namespace bfmresp
