#pragma once

// Prepare-and-measure simulator for a decohering two-level system.

#include "gptomo/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gptomo::synth {

/// Unit vector on the Bloch sphere.
class Direction {
public:
    /// Normalizes v; throws InvalidArgument for a zero vector.
    explicit Direction(const Vec3& v);
    Direction(double x, double y, double z) : Direction(Vec3(x, y, z)) {}

    const Vec3& vec() const { return v_; }
    double dot(const Direction& other) const { return v_.dot(other.v_); }
    Direction operator-() const { return Direction(-v_); }

private:
    Vec3 v_;
};

/// Phenomenological revival of transverse coherence between `start_us` and `end_us`.
///
/// Test fixture for non-Markovian volume growth. Inside the window the transverse
/// scale grows linearly from its value at `start_us` by up to a factor (1 + amplitude);
/// after the window it decays again at rate 1/t2.
struct CouplingBump {
    double start_us = 20.0;
    double end_us = 30.0;
    double amplitude = 0.6;
};

struct ChannelParams {
    double t1_us = 21.9;
    double t2_us = 12.7;
    double readout_fidelity = 0.85;
    std::optional<CouplingBump> bump;

    /// Throws InvalidArgument unless t1 > 0, 0 < t2 <= 2 t1, 0.5 <= fidelity <= 1.
    void validate() const;
};

/// Bloch z coordinate of the relaxation fixed point (ground state |0>).
inline constexpr double kGroundPole = 1.0;

/// Row range of one waiting time inside a stacked table.
struct TableBlock {
    double tau_us = 0.0;
    Eigen::Index first_row = 0;
    Eigen::Index rows = 0;
    std::uint64_t seed = 0;
};

struct FrequencyTable {
    Matrix entries;   ///< m x n outcome-0 frequencies in [0, 1]
    std::int64_t shots = 0;
    double tau_us = 0.0;
    std::uint64_t seed = 0;
    Matrix variance;  ///< per-entry variance estimate, strictly positive
    /// Non-empty only for stacked tables; one entry per waiting-time block in stacking order.
    std::vector<TableBlock> blocks;

    Eigen::Index rows() const { return entries.rows(); }
    Eigen::Index cols() const { return entries.cols(); }

    /// Block layout; a plain table is a single block.
    std::vector<TableBlock> layout() const {
        if (!blocks.empty()) return blocks;
        return {TableBlock{tau_us, 0, entries.rows(), seed}};
    }
};

/// Fibonacci lattice: z_i = 1 - 2(i + 1/2)/m, azimuth 2*pi*i/phi^2.
std::vector<Direction> fibonacci_directions(int m);

/// Born rule for a pure state and a projector along the two directions: (1 + prep.meas)/2.
double ideal_probability(const Direction& prep, const Direction& meas);

/// Born rule for a (possibly mixed) Bloch vector measured along `meas`.
double born_probability(const Vec3& bloch, const Direction& meas);

/// Transverse components scaled by exp(-tau/t2); z relaxes toward the ground pole with t1.
Vec3 apply_decoherence(const Vec3& bloch, double tau_us, const ChannelParams& params);

/// Symmetric bit flip with probability 1 - fidelity.
double apply_readout_error(double p, double fidelity);

/// Noise-free outcome-0 probability for one (preparation, measurement) cell.
double cell_probability(const Direction& prep, const Direction& meas, double tau_us, const ChannelParams& params);

/// Binomial shot sampling of every cell; the stream for cell (i, j) is keyed by (seed, i, j, tau_index).
FrequencyTable sample_frequency_table(const std::vector<Direction>& preps, const std::vector<Direction>& meas,
                                      double tau_us, std::int64_t shots, const ChannelParams& params,
                                      std::uint64_t seed, std::uint64_t tau_index = 0);

/// Variance floor used for frequencies of exactly 0 or 1.
double variance_floor(std::int64_t shots);

/// F(1 - F)/N per entry, floored at 1/(4 N^2).
Matrix variance_table(const Matrix& entries, std::int64_t shots);

}  // namespace gptomo::synth
