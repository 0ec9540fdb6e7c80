#pragma once

#include <cmath>
#include <numbers>

namespace hdmi {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// log Phi(z), accurate in both tails.
inline double log_normal_cdf(double z) {
    if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
    if (z > -37.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
    // Mills-ratio asymptotic series; erfc underflows below here.
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// log(1 / (1 + e^{-t})) without overflow.
inline double log_sigmoid(double t) {
    return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

/// Binary entropy in nats with 0 log 0 = 0.
inline double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log(p) - (1.0 - p) * std::log1p(-p);
}

}  // namespace hdmi
