#pragma once

// Synthetic beamforming feedback captures with a known breathing rate.
//
// Each subcarrier has a static channel H0 (n_cols x n_rows, STA x AP) and a
// fixed unit-norm breathing direction B. At time t
//
//   H(t) = H0 + gain * sin(2 pi rate/60 t) * B + sigma * N(t)
//
// with N(t) fresh circular complex Gaussian noise. The fed-back V is the
// right singular matrix of H(t) (columns by descending singular value),
// compressed with the Givens codec.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "capture.hpp"
#include "codec.hpp"
#include "error.hpp"
#include "pipeline.hpp"

namespace bfmresp {

struct BreathingScenario {
    double rate = 15.0;                   // breaths/minute, 0 = breath hold
    double duration = 300.0;              // s
    double feedback_interval_mean = 0.2;  // s
    double feedback_interval_jitter = 0.0;  // s, uniform +-
    double breathing_gain = 0.5;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;
    int n_rows = 4;         // AP antennas
    int n_cols = 4;         // STA antennas / streams
    int n_subcarriers = 250;
    QuantizationConfig config{};
    MacAddress source{0x02, 0x00, 0x00, 0x00, 0x00, 0x02};  // STA
    MacAddress dest{0x02, 0x00, 0x00, 0x00, 0x00, 0x01};    // AP

    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError("scenario: " + what); };
        if (!(rate >= 0) || !std::isfinite(rate)) fail("rate must be >= 0");
        if (!(duration > 0) || !std::isfinite(duration)) fail("duration must be > 0");
        if (!(feedback_interval_mean > 0)) fail("feedback interval must be > 0");
        if (!(feedback_interval_jitter >= 0) ||
            !(feedback_interval_jitter < feedback_interval_mean))
            fail("jitter must satisfy 0 <= jitter < mean interval");
        if (!(breathing_gain >= 0)) fail("breathing gain must be >= 0");
        if (!(noise_sigma >= 0)) fail("noise sigma must be >= 0");
        if (n_subcarriers < 1) fail("need at least one subcarrier");
        validate_dims(n_rows, n_cols);
        config.validate();
    }
};

struct ChannelModel {
    std::vector<Eigen::MatrixXcd> static_h;             // per subcarrier, n_cols x n_rows
    std::vector<Eigen::MatrixXcd> breathing_direction;  // per subcarrier, unit Frobenius norm
};

namespace detail {

inline Eigen::MatrixXcd complex_gaussian(Eigen::Index rows, Eigen::Index cols,
                                         std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double re = normal(rng);
            const double im = normal(rng);
            m(r, c) = {re, im};
        }
    return m;
}

inline std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

} // namespace detail

inline ChannelModel make_channel_model(const BreathingScenario& s) {
    s.validate();
    auto rng = detail::seeded(s.seed, 0);
    ChannelModel model;
    for (int k = 0; k < s.n_subcarriers; ++k) {
        model.static_h.push_back(detail::complex_gaussian(s.n_cols, s.n_rows, rng));
        Eigen::MatrixXcd b = detail::complex_gaussian(s.n_cols, s.n_rows, rng);
        b /= b.norm();
        model.breathing_direction.push_back(std::move(b));
    }
    return model;
}

/// Per-subcarrier CSI matrices at time t; draws fresh noise from `rng`.
inline std::vector<Eigen::MatrixXcd> generate_channel_at(double t, const ChannelModel& model,
                                                         const BreathingScenario& s,
                                                         std::mt19937_64& rng) {
    std::vector<Eigen::MatrixXcd> h;
    h.reserve(model.static_h.size());
    const double breath =
        s.rate > 0 ? s.breathing_gain * std::sin(2 * std::numbers::pi * s.rate / 60.0 * t) : 0.0;
    for (std::size_t k = 0; k < model.static_h.size(); ++k) {
        Eigen::MatrixXcd m = model.static_h[k];
        if (breath != 0.0) m += breath * model.breathing_direction[k];
        if (s.noise_sigma > 0)
            m += s.noise_sigma * detail::complex_gaussian(m.rows(), m.cols(), rng);
        h.push_back(std::move(m));
    }
    return h;
}

/// Right singular matrix of H (n_rows x n_cols), columns by descending singular value.
inline BfmMatrix right_singular_matrix(const Eigen::MatrixXcd& h) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h, Eigen::ComputeThinV);
    return svd.matrixV();
}

/// Frame times 0, t1, ... strictly below the scenario duration.
inline std::vector<double> frame_times(const BreathingScenario& s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-s.feedback_interval_jitter,
                                                  s.feedback_interval_jitter);
    std::vector<double> times;
    // t_{i+1} = t_i + mean + jitter_i, written as i * mean + sum(jitter) to avoid
    // accumulating rounding in the nominal part.
    double offset = 0.0;
    for (std::size_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * s.feedback_interval_mean + offset;
        if (t >= s.duration - 1e-9) break;
        times.push_back(t);
        if (s.feedback_interval_jitter > 0) offset += jitter(rng);
    }
    return times;
}

inline CaptureStream generate_capture(const BreathingScenario& s) {
    s.validate();
    const ChannelModel model = make_channel_model(s);
    auto rng = detail::seeded(s.seed, 1);
    const std::vector<double> times = frame_times(s, rng);

    CaptureStream stream;
    stream.metadata.source_file = "synthetic";
    stream.metadata.duration = s.duration;
    stream.records.reserve(times.size());
    constexpr int kMaxRetries = 3;
    for (double t : times) {
        BfmFrameRecord rec;
        rec.timestamp = t;
        rec.source = s.source;
        rec.dest = s.dest;
        rec.n_rows = s.n_rows;
        rec.n_cols = s.n_cols;
        rec.n_subcarriers = s.n_subcarriers;
        for (int attempt = 0;; ++attempt) {
            rec.angle_sets.clear();
            try {
                for (const auto& h : generate_channel_at(t, model, s, rng))
                    rec.angle_sets.push_back(decompose_v(right_singular_matrix(h), s.config));
                break;
            } catch (const DecompositionError& e) {
                if (attempt + 1 >= kMaxRetries)
                    throw SynthesisError("frame at t=" + std::to_string(t) + ": " + e.what());
            }
        }
        stream.records.push_back(std::move(rec));
    }
    stream.metadata.parsed_frames = stream.records.size();
    return stream;
}

/// Constant-rate truth for every window sliding_estimate produces over the scenario.
inline std::vector<TruthPoint> ground_truth(const BreathingScenario& s, const PipelineConfig& cfg) {
    std::vector<TruthPoint> truth;
    const std::size_t n = window_count(s.duration, cfg);
    truth.reserve(n);
    for (std::size_t w = 0; w < n; ++w) truth.push_back({window_start(w, cfg), s.rate});
    return truth;
}

} // namespace bfmresp
