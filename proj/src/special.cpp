#include "fdot/special.hpp"

#include <cmath>
#include <numbers>

#include "fdot/error.hpp"

namespace fdot {

namespace {

// exp(z^2) with z^2 split into hi + lo so the rounding of z*z does not leak
// into the exponential (relative error hi * 2^-53 otherwise).
double exp_square(double z) {
    const double hi = z * z;
    const double lo = std::fma(z, z, -hi);
    return std::exp(hi) * (1.0 + lo);
}

// Continued fraction erfc(z) = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))),
// evaluated bottom-up. 60 levels is far past convergence for z >= 8.
double erfcx_continued_fraction(double z) {
    double f = z;
    for (int n = 60; n >= 1; --n) f = z + 0.5 * n / f;
    return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

constexpr double kFractionThreshold = 8.0;

}  // namespace

double erfcx(double z) {
    if (std::isnan(z)) return z;
    if (z < 0) return 2.0 * exp_square(z) - erfcx(-z);
    if (z < kFractionThreshold) return exp_square(z) * std::erfc(z);
    return erfcx_continued_fraction(z);
}

double k3_unchecked(double depth_sum_mm, double t_ps, double beta, double diffusivity) {
    const double dt = diffusivity * t_ps;
    const double zeta = (depth_sum_mm + 2.0 * beta * dt) / std::sqrt(4.0 * dt);
    return 1.0 - beta * std::sqrt(std::numbers::pi * dt) * erfcx(zeta);
}

double k3(double x3_mm, double y3_mm, double t_ps, const OpticalParams& p) {
    if (!(t_ps > 0)) throw DomainError("K3 requires t > 0", "t");
    if (!(x3_mm >= 0) || !(y3_mm >= 0)) throw DomainError("K3 requires non-negative depths", "x3");
    return k3_unchecked(x3_mm + y3_mm, t_ps, p.beta(), p.diffusivity());
}

}  // namespace fdot
