#include "gptomo/synthdata.hpp"

#include "gptomo/error.hpp"
#include "gptomo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gptomo::synth {

Direction::Direction(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("Direction: vector must be nonzero and finite");
    v_ = v / n;
}

void ChannelParams::validate() const {
    if (!(t1_us > 0.0)) throw InvalidArgument("ChannelParams: t1 must be positive");
    if (!(t2_us > 0.0) || t2_us > 2.0 * t1_us) throw InvalidArgument("ChannelParams: need 0 < t2 <= 2 t1");
    if (!(readout_fidelity >= 0.5 && readout_fidelity <= 1.0))
        throw InvalidArgument("ChannelParams: readout fidelity must lie in [0.5, 1]");
    if (bump) {
        if (!(bump->end_us > bump->start_us) || bump->start_us < 0.0)
            throw InvalidArgument("ChannelParams: bump window must satisfy 0 <= start < end");
        if (bump->amplitude < 0.0) throw InvalidArgument("ChannelParams: bump amplitude must be nonnegative");
    }
}

std::vector<Direction> fibonacci_directions(int m) {
    if (m <= 0) throw InvalidArgument("fibonacci_directions: m must be positive");
    const double phi = std::numbers::phi;
    const double golden_angle = 2.0 * std::numbers::pi / (phi * phi);
    std::vector<Direction> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / m;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = golden_angle * i;
        out.emplace_back(rho * std::cos(az), rho * std::sin(az), z);
    }
    return out;
}

double ideal_probability(const Direction& prep, const Direction& meas) {
    return std::clamp(0.5 * (1.0 + prep.dot(meas)), 0.0, 1.0);
}

double born_probability(const Vec3& bloch, const Direction& meas) {
    return std::clamp(0.5 * (1.0 + bloch.dot(meas.vec())), 0.0, 1.0);
}

namespace {

double transverse_factor(double tau, const ChannelParams& params) {
    const double t2 = params.t2_us;
    if (!params.bump || tau <= params.bump->start_us) return std::exp(-tau / t2);
    const CouplingBump& b = *params.bump;
    const double base = std::exp(-b.start_us / t2);
    if (tau <= b.end_us) return base * (1.0 + b.amplitude * (tau - b.start_us) / (b.end_us - b.start_us));
    return base * (1.0 + b.amplitude) * std::exp(-(tau - b.end_us) / t2);
}

}  // namespace

Vec3 apply_decoherence(const Vec3& bloch, double tau_us, const ChannelParams& params) {
    if (tau_us < 0.0) throw InvalidArgument("apply_decoherence: tau must be nonnegative");
    const double ct = transverse_factor(tau_us, params);
    const double cl = std::exp(-tau_us / params.t1_us);
    return {bloch.x() * ct, bloch.y() * ct, kGroundPole + (bloch.z() - kGroundPole) * cl};
}

double apply_readout_error(double p, double fidelity) { return fidelity * p + (1.0 - fidelity) * (1.0 - p); }

double cell_probability(const Direction& prep, const Direction& meas, double tau_us, const ChannelParams& params) {
    const Vec3 evolved = apply_decoherence(prep.vec(), tau_us, params);
    return std::clamp(apply_readout_error(born_probability(evolved, meas), params.readout_fidelity), 0.0, 1.0);
}

double variance_floor(std::int64_t shots) {
    const auto n = static_cast<double>(shots);
    return 1.0 / (4.0 * n * n);
}

Matrix variance_table(const Matrix& entries, std::int64_t shots) {
    if (shots < 1) throw InvalidArgument("variance_table: shots must be >= 1");
    const auto n = static_cast<double>(shots);
    const double floor = variance_floor(shots);
    return entries.unaryExpr([n, floor](double f) { return std::max(f * (1.0 - f) / n, floor); });
}

FrequencyTable sample_frequency_table(const std::vector<Direction>& preps, const std::vector<Direction>& meas,
                                      double tau_us, std::int64_t shots, const ChannelParams& params,
                                      std::uint64_t seed, std::uint64_t tau_index) {
    if (preps.empty() || meas.empty()) throw InvalidArgument("sample_frequency_table: empty direction list");
    if (shots < 1) throw InvalidArgument("sample_frequency_table: shots must be >= 1");
    params.validate();

    const auto m = static_cast<Eigen::Index>(preps.size());
    const auto n = static_cast<Eigen::Index>(meas.size());
    FrequencyTable table;
    table.entries.resize(m, n);
    table.shots = shots;
    table.tau_us = tau_us;
    table.seed = seed;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vec3 evolved = apply_decoherence(preps[static_cast<std::size_t>(i)].vec(), tau_us, params);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double p = std::clamp(
                apply_readout_error(born_probability(evolved, meas[static_cast<std::size_t>(j)]), params.readout_fidelity),
                0.0, 1.0);
            Rng rng(derive_key(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j), tau_index}));
            table.entries(i, j) = static_cast<double>(rng.binomial(shots, p)) / static_cast<double>(shots);
        }
    }
    table.variance = variance_table(table.entries, shots);
    return table;
}

}  // namespace gptomo::synth
