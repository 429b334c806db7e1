#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace loko::detail {

/// log of the Gaussian upper tail Q(z) = erfc(z / sqrt 2) / 2, accurate far
/// into both tails.
inline double log_q(double z) noexcept {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    if (z < 0.0) return std::log1p(-0.5 * std::erfc(-z * inv_sqrt2));
    const double x = z * inv_sqrt2;
    if (x < 26.0) return std::log(0.5 * std::erfc(x));
    // erfc(x) ~ exp(-x^2) / (x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6) + 105/(16x^8))
    const double r = 1.0 / (2.0 * x * x);
    const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    return -x * x - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series) - std::numbers::ln2;
}

/// log(Q(a) - Q(b)) for b >= a. Each branch avoids the cancellation of
/// subtracting two nearly equal tail probabilities.
inline double log_q_diff(double a, double b) noexcept {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    if (!(b > a)) return -std::numeric_limits<double>::infinity();
    if (a >= 0.0) {
        const double la = log_q(a);
        const double lb = log_q(b);
        return la + std::log(-std::expm1(lb - la));
    }
    if (b <= 0.0) {
        const double l1 = log_q(-b);
        const double l2 = log_q(-a);
        return l1 + std::log(-std::expm1(l2 - l1));
    }
    return std::log(0.5 * (std::erf(b * inv_sqrt2) + std::erf(-a * inv_sqrt2)));
}

inline double q_function(double z) noexcept { return 0.5 * std::erfc(z * 0.70710678118654752440); }

}  // namespace loko::detail
