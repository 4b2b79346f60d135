// bfmresp: respiratory rate estimation from captured beamforming feedback.
//
//   bfmresp estimate --input cap.pcap [--truth truth.csv] [--json|--csv] [--out file]
//   bfmresp synth    --out cap.jsonl [--format fixture|pcap] [--rate 15] ...
//   bfmresp decode   --input cap.jsonl --frame 0
//   bfmresp spectrum --input cap.jsonl --window-start 0 [--band-passed]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <bfmresp/bfmresp.hpp>

namespace {

using namespace bfmresp;
using nlohmann::json;

struct PipelineFlags {
    std::optional<std::string> config_file;
    std::optional<double> window, step, interp, band_low, band_high, theta, max_gap;
    std::optional<int> zero_pad;
    bool taper = false;

    void attach(CLI::App& app) {
        app.add_option("--config", config_file, "JSON file with pipeline settings");
        app.add_option("--window", window, "window length in s (default 60)");
        app.add_option("--step", step, "window step in s (default 1)");
        app.add_option("--interp", interp, "interpolation interval in s (default 0.1)");
        app.add_option("--band-low", band_low, "band-pass low edge, breaths/minute (default 10)");
        app.add_option("--band-high", band_high, "band-pass high edge, breaths/minute (default 50)");
        app.add_option("--theta", theta, "detection threshold (default 5.0)");
        app.add_option("--max-gap", max_gap, "gap in s that marks a window low-confidence (default 5)");
        app.add_option("--zero-pad", zero_pad, "DFT zero-padding factor (default 1)");
        app.add_flag("--taper", taper, "apply a Hann taper before the DFT");
    }

    // defaults < config file < flags
    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (config_file) {
            std::ifstream is(*config_file);
            if (!is) throw IoError("cannot open " + *config_file);
            try {
                cfg = config_from_json(json::parse(is));
            } catch (const json::exception& e) {
                throw ParseError(*config_file + ": " + e.what());
            }
        }
        if (window) cfg.window_length = *window;
        if (step) cfg.window_step = *step;
        if (interp) cfg.interp_interval = *interp;
        if (band_low) cfg.band_low = *band_low;
        if (band_high) cfg.band_high = *band_high;
        if (theta) cfg.theta = *theta;
        if (max_gap) cfg.max_gap = *max_gap;
        if (zero_pad) cfg.zero_pad_factor = *zero_pad;
        if (taper) cfg.hann_taper = true;
        cfg.validate();
        return cfg;
    }
};

MacAddress parse_mac(const std::string& text) {
    MacAddress mac{};
    unsigned v[6];
    char tail;
    if (std::sscanf(text.c_str(), "%x:%x:%x:%x:%x:%x%c", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5],
                    &tail) != 6)
        throw ConfigError("invalid MAC address '" + text + "'");
    for (int i = 0; i < 6; ++i) {
        if (v[i] > 0xff) throw ConfigError("invalid MAC address '" + text + "'");
        mac[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v[i]);
    }
    return mac;
}

struct InputFlags {
    std::string input;
    std::string format = "auto";
    std::vector<std::string> sources, dests;

    void attach(CLI::App& app, bool allow_series = false) {
        app.add_option("--input", input, "capture file (pcap or fixture)")->required();
        if (allow_series)
            app.add_option("--format", format, "pcap, fixture, auto, or series (t,value CSV)")
                ->check(CLI::IsMember({"auto", "pcap", "fixture", "series"}));
        else
            app.add_option("--format", format, "pcap, fixture or auto")
                ->check(CLI::IsMember({"auto", "pcap", "fixture"}));
        app.add_option("--src", sources, "accept only frames from these transmitter MACs");
        app.add_option("--dst", dests, "accept only frames to these receiver MACs");
    }

    CaptureStream load() const {
        MacFilter filter;
        for (const auto& s : sources) filter.sources.push_back(parse_mac(s));
        for (const auto& d : dests) filter.dests.push_back(parse_mac(d));
        return load_capture(input, parse_capture_format(format), filter);
    }
};

// Writes to the file when a path is given, otherwise to stdout. Output is
// staged in memory so a failure leaves no partial file.
void emit(const std::optional<std::string>& path, const std::string& text) {
    if (!path) {
        std::cout << text;
        return;
    }
    std::ofstream os(*path, std::ios::binary);
    if (!os) throw IoError("cannot open " + *path + " for writing");
    os << text;
    if (!os) throw IoError("write to " + *path + " failed");
}

int run_estimate(const InputFlags& in, const PipelineFlags& pf, const std::optional<std::string>& truth,
                 bool csv, const std::optional<std::string>& out) {
    const PipelineConfig cfg = pf.resolve();
    const CaptureStream stream = in.load();

    RunReport report;
    report.config = cfg;
    report.stream = stream.metadata;
    report.duration = stream.duration();
    if (!stream.records.empty()) {
        const auto& r = stream.records.front();
        report.n_rows = static_cast<std::size_t>(r.n_rows);
        report.n_cols = static_cast<std::size_t>(r.n_cols);
        report.n_subcarriers = static_cast<std::size_t>(r.n_subcarriers);
        report.quantization = r.config();
    }
    report.windows = sliding_estimate(stream, cfg);
    if (truth) report.rmse = rmse(report.windows, read_truth_csv(*truth));

    std::ostringstream text;
    if (csv)
        write_csv(report, text);
    else
        text << to_json(report).dump(2) << '\n';
    emit(out, text.str());
    return 0;
}

struct SynthFlags {
    BreathingScenario scenario;
    std::string out;
    std::string format = "fixture";
    std::optional<std::string> truth_out;
    bool nanosecond = false;

    void attach(CLI::App& app) {
        auto& s = scenario;
        app.add_option("--rate", s.rate, "breathing rate in breaths/minute, 0 = breath hold")
            ->capture_default_str();
        app.add_option("--duration", s.duration, "capture length in s")->capture_default_str();
        app.add_option("--interval", s.feedback_interval_mean, "mean feedback interval in s")
            ->capture_default_str();
        app.add_option("--jitter", s.feedback_interval_jitter, "uniform interval jitter in s")
            ->capture_default_str();
        app.add_option("--gain", s.breathing_gain, "breathing perturbation amplitude")
            ->capture_default_str();
        app.add_option("--noise", s.noise_sigma, "per-entry complex noise scale")
            ->capture_default_str();
        app.add_option("--seed", s.seed, "random seed")->capture_default_str();
        app.add_option("--rows", s.n_rows, "AP antennas (BFM rows)")->capture_default_str();
        app.add_option("--cols", s.n_cols, "STA streams (BFM columns)")->capture_default_str();
        app.add_option("--subcarriers", s.n_subcarriers, "subcarriers per report")
            ->capture_default_str();
        app.add_option("--b-phi", s.config.b_phi, "phi bit width")->capture_default_str();
        app.add_option("--b-psi", s.config.b_psi, "psi bit width")->capture_default_str();
        app.add_option("--out", out, "output file")->required();
        app.add_option("--format", format, "fixture or pcap")
            ->check(CLI::IsMember({"fixture", "pcap"}))
            ->capture_default_str();
        app.add_option("--truth-out", truth_out, "also write per-window ground truth CSV");
        app.add_flag("--nanosecond", nanosecond, "nanosecond pcap timestamps");
    }
};

int run_synth(const SynthFlags& sf, const PipelineFlags& pf) {
    const CaptureStream stream = generate_capture(sf.scenario);
    if (sf.format == "pcap") {
        PcapWriteOptions opts;
        opts.nanosecond = sf.nanosecond;
        write_pcap(stream, sf.out, opts);
    } else {
        write_fixture(stream, sf.out);
    }
    if (sf.truth_out) {
        std::ostringstream text;
        write_truth_csv(ground_truth(sf.scenario, pf.resolve()), text);
        emit(sf.truth_out, text.str());
    }
    std::cerr << "wrote " << stream.records.size() << " frames to " << sf.out << '\n';
    return 0;
}

json decode_frame(const BfmFrameRecord& rec, std::size_t index) {
    json subcarriers = json::array();
    for (std::size_t s = 0; s < rec.angle_sets.size(); ++s) {
        const AngleSet& a = rec.angle_sets[s];
        const BfmMatrix v = reconstruct_v(a);
        json rows = json::array();
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < v.cols(); ++c) row.push_back({v(r, c).real(), v(r, c).imag()});
            rows.push_back(std::move(row));
        }
        subcarriers.push_back({{"index", s},
                               {"phi", a.phi_indices},
                               {"psi", a.psi_indices},
                               {"v", std::move(rows)}});
    }
    return {{"frame", index},
            {"timestamp", rec.timestamp},
            {"source", format_mac(rec.source)},
            {"dest", format_mac(rec.dest)},
            {"n_rows", rec.n_rows},
            {"n_cols", rec.n_cols},
            {"b_phi", rec.config().b_phi},
            {"b_psi", rec.config().b_psi},
            {"n_subcarriers", rec.n_subcarriers},
            {"subcarriers", std::move(subcarriers)}};
}

int run_decode(const InputFlags& in, std::size_t frame, const std::optional<std::string>& out) {
    const CaptureStream stream = in.load();
    if (frame >= stream.records.size())
        throw OutOfRangeError("frame " + std::to_string(frame) + " out of range (capture has " +
                              std::to_string(stream.records.size()) + " frames)");
    emit(out, decode_frame(stream.records[frame], frame).dump(2) + "\n");
    return 0;
}

int run_spectrum(const InputFlags& in, const PipelineFlags& pf, double start, bool band_passed,
                 const std::optional<std::string>& out) {
    const PipelineConfig cfg = pf.resolve();
    Spectrum spectrum;
    if (in.format == "series") {
        std::ifstream is(in.input);
        if (!is) throw IoError("cannot open " + in.input);
        const auto [t, values] = read_series_csv(is);
        const UniformSeries u = interpolate_uniform(values, t, cfg);
        spectrum = compute_spectrum(u, {cfg.hann_taper, cfg.zero_pad_factor});
    } else {
        const CaptureStream stream = in.load();
        const std::size_t n = window_count(stream.duration(), cfg);
        const double index = start / cfg.window_step;
        const auto w = static_cast<std::size_t>(std::llround(index));
        if (start < 0 || std::abs(index - static_cast<double>(w)) > 1e-6 || w >= n)
            throw OutOfRangeError("no window starts at " + format_number(start) + " s (capture has " +
                                  std::to_string(n) + " windows every " +
                                  format_number(cfg.window_step) + " s)");
        const double ws = window_start(w, cfg);
        std::vector<double> ts;
        for (const auto& r : stream.records) ts.push_back(r.timestamp);
        const auto [lo, hi] = window_rows(ts, ws, cfg.window_length);
        const std::span<const BfmFrameRecord> frames(stream.records.data() + lo, hi - lo);
        spectrum = analyze_window(build_feature_matrix(frames), cfg, ws).spectrum;
    }
    if (band_passed) spectrum = band_pass(spectrum, cfg);
    std::ostringstream text;
    write_spectrum_csv(spectrum, text);
    emit(out, text.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Respiratory rate estimation from 802.11 compressed beamforming feedback"};
    app.require_subcommand(1);

    InputFlags est_in;
    PipelineFlags est_pf;
    std::optional<std::string> truth, est_out;
    bool as_json = false, as_csv = false;
    auto* estimate = app.add_subcommand("estimate", "estimate respiratory rate per window");
    est_in.attach(*estimate);
    est_pf.attach(*estimate);
    estimate->add_option("--truth", truth, "ground truth CSV (window_start,rate) for RMSE");
    estimate->add_option("--out", est_out, "write the report here instead of stdout");
    auto* json_flag = estimate->add_flag("--json", as_json, "JSON report (default)");
    estimate->add_flag("--csv", as_csv, "CSV rows")->excludes(json_flag);

    SynthFlags synth_flags;
    PipelineFlags synth_pf;
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled capture");
    synth_flags.attach(*synth);
    synth_pf.attach(*synth);

    InputFlags dec_in;
    std::size_t frame = 0;
    std::optional<std::string> dec_out;
    auto* decode = app.add_subcommand("decode", "dump the decompressed BFMs of one frame");
    dec_in.attach(*decode);
    decode->add_option("--frame", frame, "frame index")->capture_default_str();
    decode->add_option("--out", dec_out, "write JSON here instead of stdout");

    InputFlags spec_in;
    PipelineFlags spec_pf;
    double spec_start = 0.0;
    bool band_passed = false;
    std::optional<std::string> spec_out;
    auto* spectrum = app.add_subcommand("spectrum", "per-bin DFT magnitudes of one window (CSV)");
    spec_in.attach(*spectrum, true);
    spec_pf.attach(*spectrum);
    spectrum->add_option("--window-start", spec_start, "window start in s")->capture_default_str();
    spectrum->add_flag("--band-passed", band_passed, "zero bins outside the band");
    spectrum->add_option("--out", spec_out, "write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*estimate) return run_estimate(est_in, est_pf, truth, as_csv, est_out);
        if (*synth) return run_synth(synth_flags, synth_pf);
        if (*decode) return run_decode(dec_in, frame, dec_out);
        if (*spectrum) return run_spectrum(spec_in, spec_pf, spec_start, band_passed, spec_out);
    } catch (const bfmresp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
