#pragma once

#include "fdot/model.hpp"

namespace fdot {

/// Scaled complementary error function exp(z^2) * erfc(z).
///
/// Accurate to a few ulp on z >= 0; for large z it follows 1/(z sqrt(pi)) without
/// ever forming exp(z^2), which overflows near z = 26.6.
double erfcx(double z);

/// Robin boundary factor of the half-space Green's function,
///
///   K3(x3, y3; t) = 1 - beta sqrt(pi c mu_D t) erfcx(zeta),
///   zeta = (x3 + y3 + 2 beta c mu_D t) / sqrt(4 c mu_D t).
///
/// Depths in mm, t in ps. Throws DomainError for t <= 0.
double k3(double x3_mm, double y3_mm, double t_ps, const OpticalParams& p);

/// Same as k3 with the medium reduced to (beta, c mu_D); no validation.
double k3_unchecked(double depth_sum_mm, double t_ps, double beta, double diffusivity);

}  // namespace fdot
