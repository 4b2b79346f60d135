#pragma once

/*
 Compressed beamforming feedback codec.

 A beamforming feedback matrix V (n_rows x n_cols, orthonormal columns) is
 carried on the air as a list of Givens angles:

   V = prod_{i=1}^{min(n_cols, n_rows-1)} [ D_i prod_{l=i+1}^{n_rows} G_{l,i}(psi_{l,i})^T ] * I~

 D_i puts exp(j phi_{k,i}) on the diagonal for k = i..n_rows-1, G_{l,i} is a
 real plane rotation of rows i and l, and I~ keeps the first n_cols columns.
 Angles are quantized to bin centers:

   phi = k_phi * pi / 2^(b_phi-1) + pi / 2^b_phi        in (0, 2 pi)
   psi = k_psi * pi / 2^(b_psi+1) + pi / 2^(b_psi+2)    in (0, pi/2)

 Angle ordering, used everywhere (AngleSet, bitstream, fixtures), is
 column-major: phi_{i,i}..phi_{n_rows-1,i} then psi_{i+1,i}..psi_{n_rows,i}
 for i = 1, 2, ...  The phi and psi lists are stored separately in that order.
*/

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace bfmresp {

using Complex = std::complex<double>;
using BfmMatrix = Eigen::MatrixXcd;

/// Bit widths of the phi and psi angle indices.
struct QuantizationConfig {
    int b_phi = 6;
    int b_psi = 4;

    static constexpr QuantizationConfig su_codebook0() { return {4, 2}; }
    static constexpr QuantizationConfig su_codebook1() { return {6, 4}; }
    static constexpr QuantizationConfig mu_codebook0() { return {7, 5}; }
    static constexpr QuantizationConfig mu_codebook1() { return {9, 7}; }

    /// Preset selected by the VHT MIMO Control feedback-type and codebook bits.
    static constexpr QuantizationConfig from_codebook(bool multi_user, bool codebook) {
        if (!multi_user) return codebook ? su_codebook1() : su_codebook0();
        return codebook ? mu_codebook1() : mu_codebook0();
    }

    void validate() const {
        // 16-bit index storage caps the width
        if (b_phi < 1 || b_psi < 1 || b_phi > 16 || b_psi > 16)
            throw InvalidAngleError("quantization bit widths must lie in [1, 16], got b_phi=" +
                                    std::to_string(b_phi) + " b_psi=" + std::to_string(b_psi));
    }

    friend bool operator==(const QuantizationConfig&, const QuantizationConfig&) = default;
};

/// Number of phi angles (equal to the number of psi angles) for an n_rows x n_cols matrix.
constexpr int angle_count(int n_rows, int n_cols) {
    int count = 0;
    for (int i = 1; i <= std::min(n_cols, n_rows - 1); ++i) count += n_rows - i;
    return count;
}

inline void validate_dims(int n_rows, int n_cols) {
    if (n_rows < 1 || n_cols < 1 || n_cols > n_rows || n_rows > 8)
        throw ShapeError("unsupported BFM shape " + std::to_string(n_rows) + "x" +
                         std::to_string(n_cols) + " (need 1 <= n_cols <= n_rows <= 8)");
}

/// Quantized Givens angles of one subcarrier.
struct AngleSet {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<std::uint16_t> phi_indices;
    std::vector<std::uint16_t> psi_indices;
    QuantizationConfig config;

    void validate() const {
        validate_dims(n_rows, n_cols);
        config.validate();
        const auto expected = static_cast<std::size_t>(angle_count(n_rows, n_cols));
        if (phi_indices.size() != expected || psi_indices.size() != expected)
            throw InvalidAngleError("angle set for " + std::to_string(n_rows) + "x" +
                                    std::to_string(n_cols) + " needs " + std::to_string(expected) +
                                    " phi and psi indices, got " +
                                    std::to_string(phi_indices.size()) + " and " +
                                    std::to_string(psi_indices.size()));
        auto check = [](const std::vector<std::uint16_t>& idx, int bits, const char* name) {
            const unsigned limit = 1u << bits;
            for (std::size_t p = 0; p < idx.size(); ++p)
                if (idx[p] >= limit)
                    throw InvalidAngleError(std::string(name) + " index at position " +
                                            std::to_string(p) + " is " + std::to_string(idx[p]) +
                                            ", exceeds " + std::to_string(bits) + "-bit range");
        };
        check(phi_indices, config.b_phi, "phi");
        check(psi_indices, config.b_psi, "psi");
    }

    friend bool operator==(const AngleSet&, const AngleSet&) = default;
};

/// Unquantized Givens angles in radians, same ordering as AngleSet.
struct GivensAngles {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<double> phis;
    std::vector<double> psis;
};

namespace detail {

inline double phi_bin_width(int b_phi) { return std::numbers::pi / std::ldexp(1.0, b_phi - 1); }
inline double psi_bin_width(int b_psi) { return std::numbers::pi / std::ldexp(1.0, b_psi + 1); }

// rows (i, l) <- [c s; -s c] * rows (i, l). Passing -s applies the transpose.
inline void rotate_rows(BfmMatrix& m, int i, int l, double c, double s) {
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
        const Complex a = m(i, col);
        const Complex b = m(l, col);
        m(i, col) = c * a + s * b;
        m(l, col) = -s * a + c * b;
    }
}

constexpr double kPivotEpsilon = 1e-12;

} // namespace detail

inline double dequantize_phi(unsigned k, int b_phi) {
    const double w = detail::phi_bin_width(b_phi);
    return k * w + w / 2;
}

inline double dequantize_psi(unsigned k, int b_psi) {
    const double w = detail::psi_bin_width(b_psi);
    return k * w + w / 2;
}

/// Nearest bin center; phi wraps modulo 2 pi first.
inline std::uint16_t quantize_phi(double phi, int b_phi) {
    if (!std::isfinite(phi)) throw InvalidAngleError("non-finite phi angle");
    constexpr double two_pi = 2 * std::numbers::pi;
    phi = std::fmod(phi, two_pi);
    if (phi < 0) phi += two_pi;
    const double k = std::floor(phi / detail::phi_bin_width(b_phi));
    const double top = std::ldexp(1.0, b_phi) - 1;
    return static_cast<std::uint16_t>(std::clamp(k, 0.0, top));
}

/// Nearest bin center; psi clamps to [0, pi/2] first.
inline std::uint16_t quantize_psi(double psi, int b_psi) {
    if (!std::isfinite(psi)) throw InvalidAngleError("non-finite psi angle");
    psi = std::clamp(psi, 0.0, std::numbers::pi / 2);
    const double k = std::floor(psi / detail::psi_bin_width(b_psi));
    const double top = std::ldexp(1.0, b_psi) - 1;
    return static_cast<std::uint16_t>(std::clamp(k, 0.0, top));
}

inline GivensAngles dequantize_angles(const AngleSet& a) {
    a.validate();
    GivensAngles out{a.n_rows, a.n_cols, {}, {}};
    out.phis.reserve(a.phi_indices.size());
    out.psis.reserve(a.psi_indices.size());
    for (auto k : a.phi_indices) out.phis.push_back(dequantize_phi(k, a.config.b_phi));
    for (auto k : a.psi_indices) out.psis.push_back(dequantize_psi(k, a.config.b_psi));
    return out;
}

inline AngleSet quantize_angles(const GivensAngles& g, QuantizationConfig config) {
    config.validate();
    validate_dims(g.n_rows, g.n_cols);
    AngleSet out{g.n_rows, g.n_cols, {}, {}, config};
    out.phi_indices.reserve(g.phis.size());
    out.psi_indices.reserve(g.psis.size());
    for (double phi : g.phis) out.phi_indices.push_back(quantize_phi(phi, config.b_phi));
    for (double psi : g.psis) out.psi_indices.push_back(quantize_psi(psi, config.b_psi));
    out.validate();
    return out;
}

/// Rebuilds V from continuous angles via the D_i / G_{l,i} product.
inline BfmMatrix reconstruct_v(const GivensAngles& g) {
    validate_dims(g.n_rows, g.n_cols);
    const int nr = g.n_rows;
    const int nc = g.n_cols;
    const int steps = std::min(nc, nr - 1);
    const auto count = static_cast<std::size_t>(angle_count(nr, nc));
    if (g.phis.size() != count || g.psis.size() != count)
        throw InvalidAngleError("angle list length does not match the matrix shape");

    BfmMatrix m = BfmMatrix::Identity(nr, nc);
    // Offsets of each column's block in the column-major angle lists.
    std::vector<std::size_t> offset(static_cast<std::size_t>(steps) + 1, 0);
    for (int i = 1; i <= steps; ++i) offset[i] = offset[i - 1] + static_cast<std::size_t>(nr - i);

    // The product is applied right to left (0-based indices below).
    for (int i = steps - 1; i >= 0; --i) {
        const std::size_t base = offset[static_cast<std::size_t>(i)];
        for (int l = nr - 1; l > i; --l) {
            const double psi = g.psis[base + static_cast<std::size_t>(l - i - 1)];
            detail::rotate_rows(m, i, l, std::cos(psi), -std::sin(psi));
        }
        for (int k = i; k < nr - 1; ++k) {
            const double phi = g.phis[base + static_cast<std::size_t>(k - i)];
            m.row(k) *= std::polar(1.0, phi);
        }
    }
    return m;
}

inline BfmMatrix reconstruct_v(const AngleSet& a) { return reconstruct_v(dequantize_angles(a)); }

/// Largest elementwise deviation of V^H V from the identity.
inline double orthonormality_residual(const BfmMatrix& v) {
    const Eigen::MatrixXcd gram = v.adjoint() * v;
    return (gram - Eigen::MatrixXcd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

/// Rotates each column's phase so its last-row entry is real and non-negative.
inline BfmMatrix align_last_row(const BfmMatrix& v) {
    BfmMatrix out = v;
    const Eigen::Index last = v.rows() - 1;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const Complex pivot = v(last, c);
        if (std::abs(pivot) < detail::kPivotEpsilon) continue;
        out.col(c) *= std::conj(pivot) / std::abs(pivot);
    }
    return out;
}

/// Continuous Givens decomposition; the inverse of reconstruct_v up to last-row phase.
inline GivensAngles decompose_angles(const BfmMatrix& v, double tolerance = 1e-6) {
    const int nr = static_cast<int>(v.rows());
    const int nc = static_cast<int>(v.cols());
    validate_dims(nr, nc);
    const double residual = orthonormality_residual(v);
    if (!(residual <= tolerance))
        throw DecompositionError("matrix columns are not orthonormal (residual " +
                                 std::to_string(residual) + ")");

    BfmMatrix m = align_last_row(v);
    GivensAngles out{nr, nc, {}, {}};
    const int steps = std::min(nc, nr - 1);
    for (int i = 0; i < steps; ++i) {
        for (int k = i; k < nr - 1; ++k) {
            const Complex z = m(k, i);
            double phi = std::abs(z) < detail::kPivotEpsilon ? 0.0 : std::arg(z);
            if (phi < 0) phi += 2 * std::numbers::pi;
            out.phis.push_back(phi);
            m.row(k) *= std::polar(1.0, -phi);
        }
        for (int l = i + 1; l < nr; ++l) {
            const double x = m(i, i).real();
            const double y = m(l, i).real();
            const double psi = std::hypot(x, y) < detail::kPivotEpsilon ? 0.0 : std::atan2(y, x);
            out.psis.push_back(psi);
            detail::rotate_rows(m, i, l, std::cos(psi), std::sin(psi));
        }
    }
    return out;
}

/// Decomposes V and quantizes its angles with the given bit widths.
inline AngleSet decompose_v(const BfmMatrix& v, QuantizationConfig config) {
    return quantize_angles(decompose_angles(v), config);
}

} // namespace bfmresp
