#pragma once

// Forward model: time-resolved fluorescence signal at a boundary detector for an
// impulsive boundary source, zero-lifetime fluorophore, half-space medium with a
// Robin boundary.
//
//   u_m(t) = C(t) int_Omega0 int_0^t [(t-s)s]^(-3/2)
//              exp(-|x_d-y|^2 / (4 c mu_D (t-s))) exp(-|x_s-y|^2 / (4 c mu_D s))
//              K3(0, y3; t-s) K3(y3, 0; s) mu_f(y, s) ds dy
//
//   C(t) = exp(-c mu_a t) / (16 pi^3 c mu_D^2)
//
// For a point target mu_f = P delta(y - x_c) the volume integral collapses.

#include <span>
#include <vector>

#include "fdot/model.hpp"
#include "fdot/quadrature.hpp"

namespace fdot {

enum class CuboidRule {
    // Horizontal integrals in closed form (erf), depth and time adaptive.
    Separable,
    // Tensor-product Gauss-Legendre over the box with the point kernel; slow, kept as reference.
    TensorGaussLegendre,
};

struct QuadratureSpec {
    double rel_tol = 1e-9;
    double abs_tol = 0.0;
    int max_subdivisions = 400;
    int volume_nodes_per_axis = 8;
    CuboidRule cuboid_rule = CuboidRule::Separable;
};

void validate(const QuadratureSpec& q);

/// Exponent scales of the source and detector legs, in ps.
struct PeakConstants {
    double A_ps = 0.0;  // |x_d - x_c|^2 / (4 c mu_D)
    double B_ps = 0.0;  // |x_s - x_c|^2 / (4 c mu_D)
};

PeakConstants peak_constants(const SDPair& pair, const Vec3& center, const OpticalParams& p);

/// C(t) above.
double emission_prefactor(double t_ps, const OpticalParams& p);

/// Point-target signal with the quadrature error estimate (already scaled like the value).
QuadratureResult tpsf_point_estimate(const SDPair& pair, const PointTarget& target, double t_ps,
                                     const OpticalParams& p, const QuadratureSpec& q);
double tpsf_point(const SDPair& pair, const PointTarget& target, double t_ps, const OpticalParams& p,
                  const QuadratureSpec& q);

/// Cuboid signal using q.cuboid_rule.
double tpsf_cuboid(const SDPair& pair, const CuboidTarget& target, double t_ps, const OpticalParams& p,
                   const QuadratureSpec& q);

/// Tensor Gauss-Legendre route regardless of q.cuboid_rule: starts at
/// q.volume_nodes_per_axis and doubles until successive results agree to q.rel_tol.
double tpsf_cuboid_tensor(const SDPair& pair, const CuboidTarget& target, double t_ps, const OpticalParams& p,
                          const QuadratureSpec& q);

/// Moving or growing cuboid. The geometry is taken at the emission time s of the
/// inner convolution, mapped through `gate`. Throws DomainError when the box
/// leaves the medium at some s in (0, t).
double tpsf_timedependent(const SDPair& pair, const Target& target, double t_ps, const OpticalParams& p,
                          const QuadratureSpec& q, const GateWindow& gate);

/// Dispatch on the target kind. `gate` only matters for time-dependent targets.
double tpsf(const SDPair& pair, const Target& target, double t_ps, const OpticalParams& p, const QuadratureSpec& q,
            const GateWindow& gate = {});

/// Samples every pair on its grid; stacked (pair-major, time-minor).
std::vector<double> simulate(const Target& target, const Acquisition& acquisition, const OpticalParams& p,
                             const QuadratureSpec& q);

/// The measurement operator K(a). Joint9 vectors override (mu_s, mu_a) of `p`.
Measurement measure(const ParamVector& params, const Acquisition& acquisition, const OpticalParams& p,
                    const QuadratureSpec& q);

/// K(a) for several parameter vectors at once, one result per input.
///
/// Box-shaped targets that share a medium are integrated on the adaptive nodes
/// chosen for the first vector of their group, so neighbouring vectors (finite
/// difference stencils) differ only through the geometry, not through the mesh.
/// Other vectors are evaluated one by one.
std::vector<std::vector<double>> measure_batch(std::span<const ParamVector> params, const Acquisition& acquisition,
                                               const OpticalParams& p, const QuadratureSpec& q);

}  // namespace fdot
