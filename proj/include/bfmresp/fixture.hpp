#pragma once

// Line-delimited JSON capture fixtures.
//
//   line 1: {"format":"bfm-fixture/1","n_rows":4,"n_cols":4,"b_phi":6,"b_psi":4,
//            "n_subcarriers":250[,"duration":300.0]}
//   line k: {"t":0.2,"phi":[[...],...],"psi":[[...],...]}
//
// The outer phi/psi arrays have one entry per subcarrier; inner arrays follow
// the AngleSet ordering.

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "capture.hpp"
#include "error.hpp"

namespace bfmresp {

inline constexpr const char* kFixtureFormat = "bfm-fixture/1";

inline void write_fixture(const CaptureStream& stream, std::ostream& os) {
    using nlohmann::json;
    json header = {{"format", kFixtureFormat}, {"n_rows", 0},        {"n_cols", 0},
                   {"b_phi", 0},               {"b_psi", 0},         {"n_subcarriers", 0}};
    if (!stream.records.empty()) {
        const BfmFrameRecord& first = stream.records.front();
        header["n_rows"] = first.n_rows;
        header["n_cols"] = first.n_cols;
        header["b_phi"] = first.config().b_phi;
        header["b_psi"] = first.config().b_psi;
        header["n_subcarriers"] = first.n_subcarriers;
    }
    if (stream.metadata.duration) header["duration"] = *stream.metadata.duration;
    os << header.dump() << '\n';

    for (const BfmFrameRecord& r : stream.records) {
        if (r.n_rows != header["n_rows"] || r.n_cols != header["n_cols"] ||
            r.n_subcarriers != header["n_subcarriers"] || r.config().b_phi != header["b_phi"] ||
            r.config().b_psi != header["b_psi"])
            throw ShapeError("fixture records must share one shape and quantization");
        json phi = json::array();
        json psi = json::array();
        for (const AngleSet& a : r.angle_sets) {
            phi.push_back(a.phi_indices);
            psi.push_back(a.psi_indices);
        }
        os << json{{"t", r.timestamp}, {"phi", std::move(phi)}, {"psi", std::move(psi)}}.dump()
           << '\n';
    }
}

inline void write_fixture(const CaptureStream& stream, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_fixture(stream, os);
    if (!os) throw IoError("write to " + path + " failed");
}

namespace detail {

inline int header_int(const nlohmann::json& header, const char* key) {
    if (!header.contains(key) || !header[key].is_number_integer())
        throw ParseError(std::string("line 1: header field '") + key + "' missing or not an integer");
    return header[key].get<int>();
}

} // namespace detail

inline CaptureStream read_fixture(std::istream& is, const std::string& source = "<stream>") {
    using nlohmann::json;
    CaptureStream stream;
    stream.metadata.source_file = source;

    std::string line;
    if (!std::getline(is, line)) throw ParseError("line 1: missing fixture header");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("line 1: ") + e.what());
    }
    if (!header.is_object() || header.value("format", "") != kFixtureFormat)
        throw ParseError(std::string("line 1: field 'format' must be \"") + kFixtureFormat + "\"");
    const int n_rows = detail::header_int(header, "n_rows");
    const int n_cols = detail::header_int(header, "n_cols");
    const QuantizationConfig config{detail::header_int(header, "b_phi"),
                                    detail::header_int(header, "b_psi")};
    const int n_sc = detail::header_int(header, "n_subcarriers");
    if (header.contains("duration")) {
        if (!header["duration"].is_number())
            throw ParseError("line 1: header field 'duration' must be a number");
        stream.metadata.duration = header["duration"].get<double>();
    }

    const auto count = static_cast<std::size_t>(
        n_rows >= 1 && n_cols >= 1 ? angle_count(n_rows, n_cols) : 0);
    std::size_t line_no = 1;
    double previous_t = -std::numeric_limits<double>::infinity();
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (stream.records.empty()) {
            // an empty fixture may carry a zeroed header; anything with records may not
            try {
                validate_dims(n_rows, n_cols);
                config.validate();
            } catch (const Error& e) {
                throw ParseError("line 1: " + std::string(e.what()));
            }
            if (n_sc < 1) throw ParseError("line 1: header field 'n_subcarriers' must be positive");
        }

        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + e.what());
        }
        if (!obj.is_object()) throw ParseError(where + "record must be a JSON object");
        if (!obj.contains("t") || !obj["t"].is_number())
            throw ParseError(where + "field 't' missing or not a number");

        BfmFrameRecord r;
        r.timestamp = obj["t"].get<double>();
        if (!std::isfinite(r.timestamp) || r.timestamp < previous_t)
            throw ParseError(where + "field 't' must be finite and non-decreasing");
        previous_t = r.timestamp;
        r.n_rows = n_rows;
        r.n_cols = n_cols;
        r.n_subcarriers = n_sc;
        r.angle_sets.resize(static_cast<std::size_t>(n_sc),
                            AngleSet{n_rows, n_cols, {}, {}, config});

        auto read_indices = [&](const char* key, int bits, auto member) {
            if (!obj.contains(key) || !obj[key].is_array() ||
                obj[key].size() != static_cast<std::size_t>(n_sc))
                throw ParseError(where + "field '" + key + "' must hold " + std::to_string(n_sc) +
                                 " per-subcarrier arrays");
            const auto& outer = obj[key];
            for (std::size_t s = 0; s < outer.size(); ++s) {
                const auto& inner = outer[s];
                if (!inner.is_array() || inner.size() != count)
                    throw ParseError(where + "field '" + key + "[" + std::to_string(s) +
                                     "]' must hold " + std::to_string(count) + " indices");
                auto& dst = r.angle_sets[s].*member;
                dst.reserve(count);
                for (std::size_t p = 0; p < count; ++p) {
                    const auto& v = inner[p];
                    if (!v.is_number_integer() || v.get<long long>() < 0 ||
                        v.get<long long>() >= (1LL << bits))
                        throw ParseError(where + "field '" + key + "[" + std::to_string(s) + "][" +
                                         std::to_string(p) + "]' is not an index in the " +
                                         std::to_string(bits) + "-bit range");
                    dst.push_back(static_cast<std::uint16_t>(v.get<long long>()));
                }
            }
        };
        read_indices("phi", config.b_phi, &AngleSet::phi_indices);
        read_indices("psi", config.b_psi, &AngleSet::psi_indices);
        stream.records.push_back(std::move(r));
    }
    stream.metadata.parsed_frames = stream.records.size();
    return stream;
}

inline CaptureStream read_fixture(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return read_fixture(is, path);
}

} // namespace bfmresp
