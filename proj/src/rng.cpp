#include "gptomo/rng.hpp"

#include <cmath>
#include <numbers>

namespace gptomo {

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t Rng::binomial(std::int64_t trials, double p) {
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;

    const auto n = static_cast<double>(trials);
    auto mode = static_cast<std::int64_t>(std::floor((n + 1.0) * p));
    if (mode > trials) mode = trials;
    const double m = static_cast<double>(mode);
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) +
                           m * std::log(p) + (n - m) * std::log1p(-p);
    const double pmf_mode = std::exp(log_pmf);
    const double odds = p / (1.0 - p);

    // Outcomes are visited in the fixed order mode, mode+1, mode-1, mode+2, ...
    double u = uniform();
    if (u < pmf_mode) return mode;
    u -= pmf_mode;

    std::int64_t hi = mode;
    std::int64_t lo = mode;
    double pmf_hi = pmf_mode;
    double pmf_lo = pmf_mode;
    while (hi < trials || lo > 0) {
        if (hi < trials) {
            pmf_hi *= static_cast<double>(trials - hi) / static_cast<double>(hi + 1) * odds;
            ++hi;
            if (u < pmf_hi) return hi;
            u -= pmf_hi;
        }
        if (lo > 0) {
            pmf_lo *= static_cast<double>(lo) / static_cast<double>(trials - lo + 1) / odds;
            --lo;
            if (u < pmf_lo) return lo;
            u -= pmf_lo;
        }
        if (pmf_hi < 1e-300 && pmf_lo < 1e-300) break;
    }
    return mode;
}

}  // namespace gptomo
