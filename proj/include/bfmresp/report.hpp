#pragma once

// Run reports and the small text formats the command-line tool exchanges.

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "capture.hpp"
#include "error.hpp"
#include "pipeline.hpp"

namespace bfmresp {

struct RunReport {
    PipelineConfig config;
    CaptureMetadata stream;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::size_t n_subcarriers = 0;
    QuantizationConfig quantization;
    double duration = 0.0;
    std::vector<RespirationEstimate> windows;
    std::optional<double> rmse;
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    return {{"window", c.window_length},  {"step", c.window_step},
            {"interp", c.interp_interval}, {"band_low", c.band_low},
            {"band_high", c.band_high},    {"theta", c.theta},
            {"taper", c.hann_taper},       {"zero_pad", c.zero_pad_factor},
            {"max_gap", c.max_gap}};
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.window_length = j.value("window", c.window_length);
    c.window_step = j.value("step", c.window_step);
    c.interp_interval = j.value("interp", c.interp_interval);
    c.band_low = j.value("band_low", c.band_low);
    c.band_high = j.value("band_high", c.band_high);
    c.theta = j.value("theta", c.theta);
    c.hann_taper = j.value("taper", c.hann_taper);
    c.zero_pad_factor = j.value("zero_pad", c.zero_pad_factor);
    c.max_gap = j.value("max_gap", c.max_gap);
    return c;
}

inline std::string join_flags(unsigned flags, char sep) {
    std::string out;
    for (const auto& name : flag_names(flags)) {
        if (!out.empty()) out += sep;
        out += name;
    }
    return out;
}

inline nlohmann::json to_json(const RunReport& r) {
    using nlohmann::json;
    json windows = json::array();
    for (const auto& e : r.windows)
        windows.push_back({{"window_start", e.window_start},
                           {"detected", e.detected},
                           {"rate", e.rate},
                           {"ratio", e.ratio},
                           {"n_frames", e.n_frames},
                           {"max_gap", e.max_gap},
                           {"flags", flag_names(e.flags)}});
    json stream = {{"source", r.stream.source_file},
                   {"parsed_frames", r.stream.parsed_frames},
                   {"skipped_frames", r.stream.skipped_frames},
                   {"skip_reasons", r.stream.skip_reasons},
                   {"duration", r.duration},
                   {"n_rows", r.n_rows},
                   {"n_cols", r.n_cols},
                   {"n_subcarriers", r.n_subcarriers},
                   {"b_phi", r.quantization.b_phi},
                   {"b_psi", r.quantization.b_psi}};
    std::size_t low_confidence = 0;
    for (const auto& e : r.windows) low_confidence += (e.flags & kFlagLowConfidenceGap) != 0;
    stream["low_confidence_windows"] = low_confidence;
    json out = {{"config", config_to_json(r.config)}, {"stream", stream}, {"windows", windows}};
    if (r.rmse) out["rmse"] = *r.rmse;
    return out;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv(const RunReport& r, std::ostream& os) {
    os << "window_start,detected,rate,ratio,flags\n";
    for (const auto& e : r.windows)
        os << format_number(e.window_start) << ',' << (e.detected ? 1 : 0) << ','
           << format_number(e.rate) << ',' << format_number(e.ratio) << ','
           << join_flags(e.flags, ';') << '\n';
}

inline void write_spectrum_csv(const Spectrum& s, std::ostream& os) {
    os << "breaths_per_minute,magnitude\n";
    for (std::size_t k = 0; k < s.magnitudes.size(); ++k)
        os << format_number(s.frequency(k)) << ',' << format_number(s.magnitudes[k]) << '\n';
}

namespace detail {

inline std::vector<std::vector<double>> read_numeric_csv(std::istream& is, std::size_t columns,
                                                         const std::string& what) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric || row.size() != columns) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw ParseError(what + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(columns) + " numeric columns");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

/// Truth CSV: `window_start,rate` per line, optional header.
inline std::vector<TruthPoint> read_truth_csv(std::istream& is) {
    std::vector<TruthPoint> out;
    for (const auto& row : detail::read_numeric_csv(is, 2, "truth"))
        out.push_back({row[0], row[1]});
    return out;
}

inline std::vector<TruthPoint> read_truth_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return read_truth_csv(is);
}

inline void write_truth_csv(const std::vector<TruthPoint>& truth, std::ostream& os) {
    os << "window_start,rate\n";
    for (const auto& t : truth) os << format_number(t.window_start) << ',' << format_number(t.rate) << '\n';
}

/// Time series CSV: `t,value` per line, optional header.
inline std::pair<std::vector<double>, std::vector<double>> read_series_csv(std::istream& is) {
    std::pair<std::vector<double>, std::vector<double>> out;
    for (const auto& row : detail::read_numeric_csv(is, 2, "series")) {
        out.first.push_back(row[0]);
        out.second.push_back(row[1]);
    }
    return out;
}

} // namespace bfmresp
