#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace levyexit {

/// Stability index of a symmetric alpha-stable law. Valid range is the open
/// interval (0, 2); construction rejects anything else (alpha = 2 is the
/// Gaussian limit and is handled by the diffusion coefficient instead).
class StabilityIndex {
public:
    explicit StabilityIndex(double alpha) : alpha_(alpha) {
        if (!(alpha > 0.0 && alpha < 2.0))
            throw std::domain_error("stability index must lie in (0, 2), got " +
                                    std::to_string(alpha));
    }
    double value() const noexcept { return alpha_; }

private:
    double alpha_;
};

namespace detail {

// Dirichlet eta(s) = sum (-1)^k (k+1)^{-s}, accelerated with the
// Cohen-Rodriguez Villegas-Zagier Chebyshev weights. The terms are totally
// monotone for s > 0, where the error bound (3+sqrt(8))^{-n} applies; n = 40
// puts the truncation error far below double rounding.
inline double dirichlet_eta(double s) {
    constexpr int n = 40;
    double d = std::pow(3.0 + std::sqrt(8.0), n);
    d = 0.5 * (d + 1.0 / d);
    double b = -1.0;
    double c = -d;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        c = b - c;
        sum += c * std::pow(k + 1.0, -s);
        b *= (k + n) * (k - n) / ((k + 0.5) * (k + 1.0));
    }
    return sum / d;
}

// zeta(s) for |s| small, via the reflection formula with the product
// sin(pi s/2) * zeta(1-s) expanded analytically. Using the Stieltjes
// constants, zeta(1-s) = -1/s + g0 + g1 s + g2 s^2/2 + g3 s^3/6 + ..., so the
// 0 * inf indeterminacy at s = 0 cancels exactly.
inline double zeta_near_zero(double s) {
    constexpr double g0 = 0.57721566490153286061;
    constexpr double g1 = -0.072815845483676724861;
    constexpr double g2 = -0.0096903631928723184845;
    constexpr double g3 = 0.0020538344203033458662;
    const double p = 0.5 * std::numbers::pi * s;
    const double p2 = p * p;
    // sin(p)/p, three series terms: error O(p^6) < 1e-18 for |s| < 1e-3
    const double sinc = 1.0 - p2 / 6.0 * (1.0 - p2 / 20.0);
    const double t = -0.5 * std::numbers::pi * sinc +
                     std::sin(p) * (g0 + s * (g1 + s * (0.5 * g2 + s * g3 / 6.0)));
    return std::pow(2.0, s) * std::pow(std::numbers::pi, s - 1.0) *
           std::tgamma(1.0 - s) * t;
}

} // namespace detail

/// Intensity constant of the alpha-stable jump measure
/// nu(dy) = C_alpha |y|^{-(1+alpha)} dy:
///
///   C_alpha = alpha Gamma((1+alpha)/2) / (2^{1-alpha} sqrt(pi) Gamma(1-alpha/2))
///
/// Strictly positive on (0,2), tending to 0 as alpha -> 2.
inline double stable_intensity_constant(StabilityIndex alpha) {
    const double a = alpha.value();
    return a * std::tgamma(0.5 * (1.0 + a)) /
           (std::pow(2.0, 1.0 - a) * std::sqrt(std::numbers::pi) *
            std::tgamma(1.0 - 0.5 * a));
}

/// Riemann zeta on [-1, 1), the range needed for the quadrature correction
/// zeta(alpha - 1) with alpha in (0, 2).
///
/// For s in (0,1) the accelerated alternating series gives
/// zeta = eta(s) / (1 - 2^{1-s}); for s in [-1,0) the reflection formula maps
/// to arguments in (1,2]. The 1 - 2^{...} denominators go through expm1 so
/// nothing cancels as s -> 1 or s -> 0, and a stabilized expansion covers the
/// immediate neighborhood of 0.
inline double riemann_zeta(double s) {
    if (!(s >= -1.0 && s < 1.0))
        throw std::domain_error("riemann_zeta: argument must lie in [-1, 1), got " +
                                std::to_string(s));
    if (std::abs(s) < 1e-3)
        return detail::zeta_near_zero(s);
    if (s > 0.0)
        return detail::dirichlet_eta(s) / (-std::expm1((1.0 - s) * std::numbers::ln2));
    const double zeta_1ms =
        detail::dirichlet_eta(1.0 - s) / (-std::expm1(s * std::numbers::ln2));
    return std::pow(2.0, s) * std::pow(std::numbers::pi, s - 1.0) *
           std::sin(0.5 * std::numbers::pi * s) * std::tgamma(1.0 - s) * zeta_1ms;
}

/// Closed-form mean exit time from (-1,1) for zero drift, epsilon = 1, d = 0:
///
///   u(x) = 2^{-alpha} sqrt(pi) / (Gamma(1+alpha/2) Gamma((1+alpha)/2))
///          * (1 - x^2)^{alpha/2}
///
/// Used as an exact reference for convergence tests of the nonlocal solver.
inline double reference_met_f0(StabilityIndex alpha, double x) {
    if (std::abs(x) > 1.0)
        throw std::domain_error("reference_met_f0: |x| must not exceed 1, got " +
                                std::to_string(x));
    const double a = alpha.value();
    const double c = std::pow(2.0, -a) * std::sqrt(std::numbers::pi) /
                     (std::tgamma(1.0 + 0.5 * a) * std::tgamma(0.5 * (1.0 + a)));
    return c * std::pow(1.0 - x * x, 0.5 * a);
}

} // namespace levyexit
