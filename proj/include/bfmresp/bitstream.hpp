#pragma once

// Angle bitstream of a compressed beamforming report. Fields are packed
// least-significant-bit first within each byte, back to back with no
// per-subcarrier padding. Per subcarrier and per column i the order is
// phi_{i,i}..phi_{n_rows-1,i}, psi_{i+1,i}..psi_{n_rows,i}.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codec.hpp"
#include "error.hpp"

namespace bfmresp {

constexpr std::size_t bits_per_subcarrier(int n_rows, int n_cols, QuantizationConfig config) {
    const auto count = static_cast<std::size_t>(angle_count(n_rows, n_cols));
    return count * static_cast<std::size_t>(config.b_phi + config.b_psi);
}

struct UnpackedReport {
    std::vector<AngleSet> angle_sets;
    std::size_t trailing_bits = 0;  // leftover bits shorter than one subcarrier
};

namespace detail {

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint16_t read(int width) {
        std::uint32_t value = 0;
        for (int b = 0; b < width; ++b, ++pos_) {
            const std::uint8_t byte = bytes_[pos_ / 8];
            value |= static_cast<std::uint32_t>((byte >> (pos_ % 8)) & 1u) << b;
        }
        return static_cast<std::uint16_t>(value);
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

class BitWriter {
public:
    void write(std::uint32_t value, int width) {
        for (int b = 0; b < width; ++b, ++pos_) {
            if (pos_ % 8 == 0) bytes_.push_back(0);
            bytes_.back() |= static_cast<std::uint8_t>(((value >> b) & 1u) << (pos_ % 8));
        }
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// Visits (is_phi, position) in wire order for one subcarrier.
template <typename F>
void for_each_wire_angle(int n_rows, int n_cols, F&& f) {
    std::size_t base = 0;
    for (int i = 1; i <= std::min(n_cols, n_rows - 1); ++i) {
        const auto block = static_cast<std::size_t>(n_rows - i);
        for (std::size_t k = 0; k < block; ++k) f(true, base + k);
        for (std::size_t k = 0; k < block; ++k) f(false, base + k);
        base += block;
    }
}

} // namespace detail

inline UnpackedReport unpack_angle_bitstream(std::span<const std::uint8_t> payload, int n_rows,
                                             int n_cols, QuantizationConfig config) {
    validate_dims(n_rows, n_cols);
    config.validate();
    const std::size_t per_sc = bits_per_subcarrier(n_rows, n_cols, config);
    const std::size_t total_bits = payload.size() * 8;
    if (per_sc == 0 || total_bits < per_sc)
        throw TruncatedReportError("report of " + std::to_string(payload.size()) +
                                   " bytes holds no complete subcarrier (" +
                                   std::to_string(per_sc) + " bits each)");

    const std::size_t n_sc = total_bits / per_sc;
    const auto count = static_cast<std::size_t>(angle_count(n_rows, n_cols));
    UnpackedReport out;
    out.trailing_bits = total_bits - n_sc * per_sc;
    out.angle_sets.reserve(n_sc);
    detail::BitReader reader(payload);
    for (std::size_t s = 0; s < n_sc; ++s) {
        AngleSet a{n_rows, n_cols, std::vector<std::uint16_t>(count),
                   std::vector<std::uint16_t>(count), config};
        detail::for_each_wire_angle(n_rows, n_cols, [&](bool is_phi, std::size_t p) {
            if (is_phi)
                a.phi_indices[p] = reader.read(config.b_phi);
            else
                a.psi_indices[p] = reader.read(config.b_psi);
        });
        out.angle_sets.push_back(std::move(a));
    }
    return out;
}

/// Inverse of unpack_angle_bitstream; the final byte is zero-padded.
inline std::vector<std::uint8_t> pack_angle_bitstream(std::span<const AngleSet> angle_sets) {
    detail::BitWriter writer;
    for (const AngleSet& a : angle_sets) {
        a.validate();
        detail::for_each_wire_angle(a.n_rows, a.n_cols, [&](bool is_phi, std::size_t p) {
            if (is_phi)
                writer.write(a.phi_indices[p], a.config.b_phi);
            else
                writer.write(a.psi_indices[p], a.config.b_psi);
        });
    }
    return writer.take();
}

} // namespace bfmresp
