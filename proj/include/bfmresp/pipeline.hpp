#pragma once

/*
 Respiration estimation from beamforming feedback.

 Per time window:
   1. feature matrix: one row per frame, |V| entries of every subcarrier
      (subcarrier-major, then row-major within each V)
   2. PCA: centered columns, first principal component scores
   3. linear interpolation of the scores onto a uniform grid
   4. DFT magnitudes, band-pass to the respiration band
   5. peak-to-mean ratio of the in-band bins against theta; the peak bin
      gives the rate in breaths/minute
*/

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "capture.hpp"
#include "codec.hpp"
#include "error.hpp"

namespace bfmresp {

struct PipelineConfig {
    double window_length = 60.0;   // s
    double window_step = 1.0;      // s
    double interp_interval = 0.1;  // s
    double band_low = 10.0;        // breaths/minute
    double band_high = 50.0;       // breaths/minute
    double theta = 5.0;
    bool hann_taper = false;
    int zero_pad_factor = 1;   // DFT length = factor * N_interp
    double max_gap = 5.0;      // s; larger gaps flag a window as low-confidence

    void validate() const {
        auto fail = [](const std::string& what) { throw ConfigError(what); };
        if (!(window_length > 0)) fail("window length must be positive");
        if (!(window_step > 0) || window_step > window_length)
            fail("window step must lie in (0, window length]");
        if (!(interp_interval > 0)) fail("interpolation interval must be positive");
        const double nyquist = 60.0 / (2.0 * interp_interval);
        if (!(band_low > 0) || !(band_low < band_high) || !(band_high < nyquist))
            fail("band must satisfy 0 < low < high < " + std::to_string(nyquist) +
                 " breaths/minute");
        if (!std::isfinite(theta) || theta < 0) fail("theta must be finite and non-negative");
        if (zero_pad_factor < 1) fail("zero-pad factor must be at least 1");
        if (!(max_gap > 0)) fail("max gap must be positive");
    }

    std::size_t interp_points() const {
        return static_cast<std::size_t>(std::floor(window_length / interp_interval + 1e-9));
    }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureMatrix {
    RowMatrix values;  // frames x (n_rows * n_cols * n_subcarriers)
    std::vector<double> timestamps;
};

struct PrincipalSeries {
    std::vector<double> scores;
    std::vector<double> contribution_rates;  // descending
    Eigen::VectorXd loading;                 // unit direction of the first component
};

struct UniformSeries {
    std::vector<double> values;
    double step = 0.0;
    std::size_t extrapolated = 0;  // trailing samples holding the last value
};

struct Spectrum {
    std::vector<double> magnitudes;  // bins 0..N/2
    double bin_width = 0.0;          // breaths/minute

    double frequency(std::size_t k) const { return static_cast<double>(k) * bin_width; }
};

enum WindowFlag : unsigned {
    kFlagNone = 0,
    kFlagInsufficientFrames = 1u << 0,
    kFlagDegenerate = 1u << 1,
    kFlagLowConfidenceGap = 1u << 2,
    kFlagExtrapolated = 1u << 3,
    kFlagInvalidTimestamps = 1u << 4,
};

inline std::vector<std::string> flag_names(unsigned flags) {
    std::vector<std::string> out;
    if (flags & kFlagInsufficientFrames) out.emplace_back("insufficient-frames");
    if (flags & kFlagDegenerate) out.emplace_back("degenerate");
    if (flags & kFlagLowConfidenceGap) out.emplace_back("low-confidence-gap");
    if (flags & kFlagExtrapolated) out.emplace_back("extrapolated");
    if (flags & kFlagInvalidTimestamps) out.emplace_back("invalid-timestamps");
    return out;
}

struct RespirationEstimate {
    double window_start = 0.0;
    bool detected = false;
    double rate = 0.0;   // breaths/minute, 0 when not detected
    double ratio = 0.0;  // in-band peak-to-mean
    unsigned flags = kFlagNone;
    std::size_t n_frames = 0;
    double max_gap = 0.0;
};

// ---------------------------------------------------------------------------
// Feature matrix

/// |V| entries of one frame, subcarrier-major then row-major within V.
inline Eigen::VectorXd feature_row(const BfmFrameRecord& frame) {
    const auto per_sc = static_cast<Eigen::Index>(frame.n_rows) * frame.n_cols;
    Eigen::VectorXd row(per_sc * static_cast<Eigen::Index>(frame.angle_sets.size()));
    Eigen::Index pos = 0;
    for (const AngleSet& a : frame.angle_sets) {
        const BfmMatrix v = reconstruct_v(a);
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            for (Eigen::Index c = 0; c < v.cols(); ++c) row(pos++) = std::abs(v(r, c));
    }
    return row;
}

inline FeatureMatrix build_feature_matrix(std::span<const BfmFrameRecord> frames) {
    FeatureMatrix m;
    if (frames.empty()) return m;
    const BfmFrameRecord& ref = frames.front();
    const auto cols = static_cast<Eigen::Index>(ref.n_rows) * ref.n_cols * ref.n_subcarriers;
    m.values.resize(static_cast<Eigen::Index>(frames.size()), cols);
    m.timestamps.reserve(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const BfmFrameRecord& f = frames[i];
        if (f.n_rows != ref.n_rows || f.n_cols != ref.n_cols ||
            f.n_subcarriers != ref.n_subcarriers ||
            f.angle_sets.size() != static_cast<std::size_t>(f.n_subcarriers) ||
            f.config() != ref.config())
            throw ShapeError("frame " + std::to_string(i) + " differs in shape from frame 0");
        if (i > 0 && f.timestamp < frames[i - 1].timestamp)
            throw ShapeError("frames must be sorted by timestamp");
        m.values.row(static_cast<Eigen::Index>(i)) = feature_row(f).transpose();
        m.timestamps.push_back(f.timestamp);
    }
    return m;
}

// ---------------------------------------------------------------------------
// PCA

namespace detail {

// Total variance below this fraction of the raw signal energy counts as zero.
constexpr double kDegenerateVariance = 1e-20;

inline void fix_sign(Eigen::VectorXd& loading, std::vector<double>& scores) {
    Eigen::Index arg = 0;
    loading.cwiseAbs().maxCoeff(&arg);
    if (loading(arg) < 0) {
        loading = -loading;
        for (double& s : scores) s = -s;
    }
}

inline std::vector<double> rates_from_eigenvalues(const Eigen::VectorXd& ascending) {
    std::vector<double> rates;
    double total = 0.0;
    for (Eigen::Index i = 0; i < ascending.size(); ++i) total += std::max(ascending(i), 0.0);
    for (Eigen::Index i = ascending.size() - 1; i >= 0; --i)
        rates.push_back(std::max(ascending(i), 0.0) / total);
    return rates;
}

// PCA from the double-centered Gram matrix K = Xc Xc^T of a window.
// The nonzero eigenvalues of K are (n-1) times those of the covariance.
inline PrincipalSeries pca_from_gram(const Eigen::MatrixXd& centered_gram,
                                     const Eigen::Ref<const RowMatrix>& centered,
                                     double raw_energy) {
    const double total = centered_gram.trace();
    if (!(total > kDegenerateVariance * raw_energy) || total <= 0)
        throw DegenerateInputError("window has zero total variance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered_gram);
    if (eig.info() != Eigen::Success) throw DegenerateInputError("eigensolver did not converge");
    const Eigen::Index n = centered_gram.rows();
    const double lambda = std::max(eig.eigenvalues()(n - 1), 0.0);
    const Eigen::VectorXd u = eig.eigenvectors().col(n - 1);

    PrincipalSeries out;
    out.contribution_rates = rates_from_eigenvalues(eig.eigenvalues());
    const double sigma = std::sqrt(lambda);
    out.scores.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.scores[static_cast<std::size_t>(i)] = u(i) * sigma;
    out.loading = centered.transpose() * u;
    const double norm = out.loading.norm();
    if (norm > 0) out.loading /= norm;
    fix_sign(out.loading, out.scores);
    return out;
}

// Largest eigenpair of a symmetric positive semi-definite matrix by Lanczos
// with full reorthogonalization. Returns false when the Ritz residual does not
// reach `tolerance` relative to the Ritz value within the step budget.
inline bool lanczos_top_eigenpair(const Eigen::MatrixXd& a, double& lambda, Eigen::VectorXd& vec,
                                  double tolerance = 1e-12) {
    const Eigen::Index n = a.rows();
    const Eigen::Index max_steps = std::min<Eigen::Index>(n, 96);
    Eigen::MatrixXd q(n, max_steps);
    std::vector<double> alpha;
    std::vector<double> beta;

    // Fixed, non-constant start vector (double-centered matrices annihilate 1).
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::sin(1.0 + 0.7 * static_cast<double>(i));
    v.normalize();

    for (Eigen::Index j = 0; j < max_steps; ++j) {
        q.col(j) = v;
        Eigen::VectorXd w = a * v;
        alpha.push_back(v.dot(w));
        for (int pass = 0; pass < 2; ++pass) {
            const auto basis = q.leftCols(j + 1);
            w -= basis * (basis.transpose() * w);
        }
        const double b = w.norm();
        const Eigen::Index m = j + 1;
        const bool exhausted = b <= 1e-14 * std::abs(alpha.front()) || m == max_steps;
        if (m % 8 == 0 || exhausted) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
            for (Eigen::Index i = 0; i < m; ++i) {
                t(i, i) = alpha[static_cast<std::size_t>(i)];
                if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
            const double theta = small.eigenvalues()(m - 1);
            const Eigen::VectorXd s = small.eigenvectors().col(m - 1);
            const double residual = b * std::abs(s(m - 1));
            if (residual <= tolerance * std::abs(theta) || b <= 1e-14 * std::abs(alpha.front())) {
                lambda = theta;
                vec = q.leftCols(m) * s;
                vec.normalize();
                return true;
            }
            if (m == max_steps) return false;
        }
        beta.push_back(b);
        v = w / b;
    }
    return false;
}

// First component only, for the sliding estimator. contribution_rates holds
// just the first rate.
inline PrincipalSeries first_component_from_gram(const Eigen::MatrixXd& centered_gram,
                                                 const Eigen::Ref<const RowMatrix>& centered,
                                                 double raw_energy) {
    const double total = centered_gram.trace();
    if (!(total > kDegenerateVariance * raw_energy) || total <= 0)
        throw DegenerateInputError("window has zero total variance");
    double lambda = 0.0;
    Eigen::VectorXd u;
    if (!lanczos_top_eigenpair(centered_gram, lambda, u))
        return pca_from_gram(centered_gram, centered, raw_energy);
    lambda = std::max(lambda, 0.0);

    PrincipalSeries out;
    out.contribution_rates = {lambda / total};
    const double sigma = std::sqrt(lambda);
    out.scores.resize(static_cast<std::size_t>(u.size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) out.scores[static_cast<std::size_t>(i)] = u(i) * sigma;
    out.loading = centered.transpose() * u;
    const double norm = out.loading.norm();
    if (norm > 0) out.loading /= norm;
    fix_sign(out.loading, out.scores);
    return out;
}

} // namespace detail

inline PrincipalSeries apply_pca(const FeatureMatrix& m) {
    const Eigen::Index n = m.values.rows();
    const Eigen::Index d = m.values.cols();
    if (n < 2) throw InsufficientDataError("PCA needs at least 2 frames, got " + std::to_string(n));
    if (d < 1) throw ShapeError("feature matrix has no columns");

    const Eigen::RowVectorXd mean = m.values.colwise().mean();
    const RowMatrix centered = m.values.rowwise() - mean;
    const double raw_energy = m.values.squaredNorm();

    if (n <= d) {
        const Eigen::MatrixXd gram = centered * centered.transpose();
        return detail::pca_from_gram(gram, centered, raw_energy);
    }

    const Eigen::MatrixXd scatter = centered.transpose() * centered;
    if (!(scatter.trace() > detail::kDegenerateVariance * raw_energy) || scatter.trace() <= 0)
        throw DegenerateInputError("window has zero total variance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
    if (eig.info() != Eigen::Success) throw DegenerateInputError("eigensolver did not converge");
    PrincipalSeries out;
    out.contribution_rates = detail::rates_from_eigenvalues(eig.eigenvalues());
    out.loading = eig.eigenvectors().col(d - 1);
    const Eigen::VectorXd s = centered * out.loading;
    out.scores.assign(s.data(), s.data() + s.size());
    detail::fix_sign(out.loading, out.scores);
    return out;
}

// ---------------------------------------------------------------------------
// Interpolation and spectrum

inline UniformSeries interpolate_uniform(std::span<const double> values,
                                         std::span<const double> timestamps,
                                         const PipelineConfig& cfg) {
    if (values.size() != timestamps.size())
        throw ShapeError("value and timestamp counts differ");
    if (values.size() < 2)
        throw InsufficientDataError("interpolation needs at least 2 points, got " +
                                    std::to_string(values.size()));
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (!(timestamps[i] > timestamps[i - 1]))
            throw ShapeError("timestamps must be strictly increasing");

    UniformSeries out;
    out.step = cfg.interp_interval;
    const std::size_t n = cfg.interp_points();
    out.values.reserve(n);
    const double t0 = timestamps.front();
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * cfg.interp_interval;
        if (t > timestamps.back()) {
            out.values.push_back(values.back());
            ++out.extrapolated;
            continue;
        }
        while (seg + 2 < timestamps.size() && timestamps[seg + 1] < t) ++seg;
        const double ta = timestamps[seg];
        const double tb = timestamps[seg + 1];
        const double w = (t - ta) / (tb - ta);
        out.values.push_back(values[seg] + w * (values[seg + 1] - values[seg]));
    }
    return out;
}

struct SpectrumOptions {
    bool hann_taper = false;
    int zero_pad_factor = 1;
};

/// DFT magnitudes for bins 0..N/2 of the (optionally tapered, zero-padded) series.
inline Spectrum compute_spectrum(const UniformSeries& u, const SpectrumOptions& options = {}) {
    const std::size_t n_in = u.values.size();
    if (n_in < 2) throw InsufficientDataError("spectrum needs at least 2 samples");
    if (options.zero_pad_factor < 1) throw ConfigError("zero-pad factor must be at least 1");
    const std::size_t n = n_in * static_cast<std::size_t>(options.zero_pad_factor);

    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
        double w = 1.0;
        if (options.hann_taper)
            w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n_in - 1));
        x[i] = u.values[i] * w;
    }

    std::vector<std::complex<double>> twiddle(n);
    for (std::size_t m = 0; m < n; ++m)
        twiddle[m] = std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(m) /
                                         static_cast<double>(n));

    Spectrum s;
    s.bin_width = 60.0 / (static_cast<double>(n) * u.step);
    s.magnitudes.resize(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < n_in; ++i) {
            acc += x[i] * twiddle[m];
            m += k;
            if (m >= n) m -= n;
        }
        s.magnitudes[k] = std::abs(acc);
    }
    return s;
}

namespace detail {

inline bool in_band(double f, const PipelineConfig& cfg) {
    constexpr double eps = 1e-9;
    return f >= cfg.band_low - eps && f <= cfg.band_high + eps;
}

} // namespace detail

/// Zeroes bins outside [band_low, band_high] (edges inclusive).
inline Spectrum band_pass(const Spectrum& s, const PipelineConfig& cfg) {
    Spectrum out = s;
    std::size_t kept = 0;
    for (std::size_t k = 0; k < out.magnitudes.size(); ++k) {
        if (detail::in_band(out.frequency(k), cfg))
            ++kept;
        else
            out.magnitudes[k] = 0.0;
    }
    if (kept == 0) throw ConfigError("band-pass range contains no spectrum bins");
    return out;
}

/// Peak-to-mean detection over the in-band bins; ties go to the lowest frequency.
inline RespirationEstimate detect_and_estimate(const Spectrum& s, const PipelineConfig& cfg) {
    RespirationEstimate est;
    double sum = 0.0;
    double peak = -1.0;
    std::size_t count = 0;
    std::size_t peak_bin = 0;
    for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
        if (!detail::in_band(s.frequency(k), cfg)) continue;
        const double mag = s.magnitudes[k];
        sum += mag;
        ++count;
        if (mag > peak) {
            peak = mag;
            peak_bin = k;
        }
    }
    if (count == 0) throw ConfigError("band-pass range contains no spectrum bins");
    const double mean = sum / static_cast<double>(count);
    if (!(mean > 0)) return est;
    est.ratio = peak / mean;
    if (est.ratio < cfg.theta) return est;
    est.detected = true;
    est.rate = s.frequency(peak_bin);
    return est;
}

// ---------------------------------------------------------------------------
// Windowed estimation

/// Intermediate products of one window, for inspection and plotting.
struct WindowAnalysis {
    PrincipalSeries principal;
    UniformSeries uniform;
    Spectrum spectrum;
    Spectrum filtered;
    RespirationEstimate estimate;
};

inline RespirationEstimate estimate_from_scores(std::span<const double> scores,
                                                std::span<const double> timestamps,
                                                const PipelineConfig& cfg,
                                                WindowAnalysis* analysis = nullptr) {
    UniformSeries u = interpolate_uniform(scores, timestamps, cfg);
    Spectrum spec = compute_spectrum(u, {cfg.hann_taper, cfg.zero_pad_factor});
    Spectrum filtered = band_pass(spec, cfg);
    RespirationEstimate est = detect_and_estimate(filtered, cfg);
    if (u.extrapolated > 0) est.flags |= kFlagExtrapolated;
    if (analysis) {
        analysis->uniform = std::move(u);
        analysis->spectrum = std::move(spec);
        analysis->filtered = std::move(filtered);
    }
    return est;
}

namespace detail {

inline double largest_gap(std::span<const double> ts, double start, double end) {
    if (ts.empty()) return end - start;
    double gap = std::max(ts.front() - start, end - ts.back());
    for (std::size_t i = 1; i < ts.size(); ++i) gap = std::max(gap, ts[i] - ts[i - 1]);
    return gap;
}

} // namespace detail

/// Runs the whole chain on one window's feature matrix.
inline WindowAnalysis analyze_window(const FeatureMatrix& m, const PipelineConfig& cfg,
                                     double window_start) {
    cfg.validate();
    WindowAnalysis a;
    a.principal = apply_pca(m);
    a.estimate = estimate_from_scores(a.principal.scores, m.timestamps, cfg, &a);
    a.estimate.window_start = window_start;
    a.estimate.n_frames = m.timestamps.size();
    a.estimate.max_gap =
        detail::largest_gap(m.timestamps, window_start, window_start + cfg.window_length);
    if (a.estimate.max_gap > cfg.max_gap) a.estimate.flags |= kFlagLowConfidenceGap;
    return a;
}

/// Number of windows of a capture covering `duration` seconds.
inline std::size_t window_count(double duration, const PipelineConfig& cfg) {
    if (duration + 1e-9 < cfg.window_length) return 0;
    return static_cast<std::size_t>(
               std::floor((duration - cfg.window_length) / cfg.window_step + 1e-9)) +
           1;
}

inline double window_start(std::size_t index, const PipelineConfig& cfg) {
    return static_cast<double>(index) * cfg.window_step;
}

/// Frame index range [first, last) whose timestamps fall in [start, start + length).
inline std::pair<std::size_t, std::size_t> window_rows(std::span<const double> timestamps,
                                                       double start, double length) {
    auto lo = std::lower_bound(timestamps.begin(), timestamps.end(), start);
    auto hi = std::lower_bound(lo, timestamps.end(), start + length);
    return {static_cast<std::size_t>(lo - timestamps.begin()),
            static_cast<std::size_t>(hi - timestamps.begin())};
}

/// Slides the window over the capture and estimates a rate per window.
///
/// Features are built once for the whole stream. The centered Gram matrix of
/// each window is assembled from a sliding cache of row inner products, so a
/// step only costs the products of the newly entered rows.
inline std::vector<RespirationEstimate> sliding_estimate(const CaptureStream& stream,
                                                         const PipelineConfig& cfg) {
    cfg.validate();
    std::vector<RespirationEstimate> out;
    if (stream.records.empty()) return out;
    const std::size_t n_windows = window_count(stream.duration(), cfg);
    if (n_windows == 0) return out;

    FeatureMatrix all = build_feature_matrix(stream.records);
    // Global centering keeps the cached inner products well conditioned; the
    // per-window double centering below removes the window mean exactly.
    const Eigen::RowVectorXd global_mean = all.values.colwise().mean();
    const RowMatrix shifted = all.values.rowwise() - global_mean;
    const std::span<const double> ts(all.timestamps);
    const Eigen::Index d = all.values.cols();

    Eigen::MatrixXd cache;  // inner products of rows [cache_lo, cache_hi)
    std::size_t cache_lo = 0;
    std::size_t cache_hi = 0;

    out.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        RespirationEstimate est;
        const double start = window_start(w, cfg);
        const auto [lo, hi] = window_rows(ts, start, cfg.window_length);
        const std::size_t n = hi - lo;
        const auto window_ts = ts.subspan(lo, n);
        try {
            if (n < 2) throw InsufficientDataError("fewer than 2 frames");
            const auto rows = shifted.middleRows(static_cast<Eigen::Index>(lo),
                                                 static_cast<Eigen::Index>(n));
            PrincipalSeries pcs;
            if (static_cast<Eigen::Index>(n) <= d) {
                Eigen::MatrixXd gram(n, n);
                const std::size_t keep_lo = std::max(lo, cache_lo);
                const std::size_t keep_hi = std::min(hi, cache_hi);
                for (std::size_t i = lo; i < hi; ++i) {
                    const bool cached_i = i >= keep_lo && i < keep_hi;
                    for (std::size_t j = lo; j <= i; ++j) {
                        double g;
                        if (cached_i && j >= keep_lo && j < keep_hi)
                            g = cache(static_cast<Eigen::Index>(i - cache_lo),
                                      static_cast<Eigen::Index>(j - cache_lo));
                        else
                            g = shifted.row(static_cast<Eigen::Index>(i))
                                    .dot(shifted.row(static_cast<Eigen::Index>(j)));
                        gram(static_cast<Eigen::Index>(i - lo), static_cast<Eigen::Index>(j - lo)) = g;
                        gram(static_cast<Eigen::Index>(j - lo), static_cast<Eigen::Index>(i - lo)) = g;
                    }
                }
                cache = gram;
                cache_lo = lo;
                cache_hi = hi;

                const Eigen::VectorXd row_mean = gram.rowwise().mean();
                const double grand = row_mean.mean();
                Eigen::MatrixXd centered_gram = gram;
                centered_gram.colwise() -= row_mean;
                centered_gram.rowwise() -= row_mean.transpose();
                centered_gram.array() += grand;

                const Eigen::RowVectorXd window_mean = rows.colwise().mean();
                const RowMatrix centered = rows.rowwise() - window_mean;
                const double raw_energy =
                    all.values.middleRows(static_cast<Eigen::Index>(lo),
                                          static_cast<Eigen::Index>(n))
                        .squaredNorm();
                pcs = detail::first_component_from_gram(centered_gram, centered, raw_energy);
            } else {
                FeatureMatrix fm{all.values.middleRows(static_cast<Eigen::Index>(lo),
                                                       static_cast<Eigen::Index>(n)),
                                 std::vector<double>(window_ts.begin(), window_ts.end())};
                pcs = apply_pca(fm);
            }
            est = estimate_from_scores(pcs.scores, window_ts, cfg);
        } catch (const InsufficientDataError&) {
            est = RespirationEstimate{};
            est.flags |= kFlagInsufficientFrames;
        } catch (const DegenerateInputError&) {
            est = RespirationEstimate{};
            est.flags |= kFlagDegenerate;
        } catch (const ShapeError&) {
            est = RespirationEstimate{};
            est.flags |= kFlagInvalidTimestamps;
        }
        est.window_start = start;
        est.n_frames = n;
        est.max_gap = detail::largest_gap(window_ts, start, start + cfg.window_length);
        if (est.max_gap > cfg.max_gap) est.flags |= kFlagLowConfidenceGap;
        out.push_back(est);
    }
    return out;
}

struct TruthPoint {
    double window_start = 0.0;
    double rate = 0.0;  // breaths/minute
};

/// Root mean squared error over all windows, rate-0 windows included.
inline double rmse(std::span<const RespirationEstimate> estimates,
                   std::span<const TruthPoint> truth) {
    if (estimates.size() != truth.size())
        throw AlignmentError("estimate count " + std::to_string(estimates.size()) +
                             " differs from truth count " + std::to_string(truth.size()));
    if (estimates.empty()) throw AlignmentError("no windows to compare");
    double sum = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        if (std::abs(estimates[i].window_start - truth[i].window_start) > 1e-6)
            throw AlignmentError("window " + std::to_string(i) + " starts at " +
                                 std::to_string(estimates[i].window_start) + " but truth at " +
                                 std::to_string(truth[i].window_start));
        const double e = estimates[i].rate - truth[i].rate;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(estimates.size()));
}

} // namespace bfmresp
