#pragma once

#include <fstream>
#include <string>

#include "capture.hpp"
#include "error.hpp"
#include "fixture.hpp"
#include "pcap.hpp"

namespace bfmresp {

enum class CaptureFormat { Auto, Pcap, Fixture };

inline CaptureFormat parse_capture_format(const std::string& name) {
    if (name == "auto") return CaptureFormat::Auto;
    if (name == "pcap") return CaptureFormat::Pcap;
    if (name == "fixture") return CaptureFormat::Fixture;
    throw ConfigError("unknown capture format '" + name + "' (expected pcap, fixture or auto)");
}

/// Picks pcap when the file starts with a pcap magic number, fixture otherwise.
inline CaptureFormat sniff_capture_format(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    unsigned char m[4] = {};
    is.read(reinterpret_cast<char*>(m), 4);
    if (is.gcount() == 4) {
        const std::uint32_t le = m[0] | m[1] << 8 | m[2] << 16 | static_cast<std::uint32_t>(m[3]) << 24;
        if (le == 0xa1b2c3d4 || le == 0xd4c3b2a1 || le == 0xa1b23c4d || le == 0x4d3cb2a1)
            return CaptureFormat::Pcap;
    }
    return CaptureFormat::Fixture;
}

inline CaptureStream load_capture(const std::string& path, CaptureFormat format = CaptureFormat::Auto,
                                  const MacFilter& filter = {}) {
    if (format == CaptureFormat::Auto) format = sniff_capture_format(path);
    return format == CaptureFormat::Pcap ? read_pcap(path, filter) : read_fixture(path);
}

} // namespace bfmresp
