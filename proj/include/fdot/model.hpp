#pragma once

// Domain types for time-domain fluorescence tomography in a half-space.
//
// Units throughout: length in mm, time in ps, optical coefficients in 1/mm.
// The medium occupies x3 > 0; sources and detectors sit on the plane x3 = 0.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fdot {

using Vec3 = std::array<double, 3>;

double distance_squared(const Vec3& a, const Vec3& b);

/// Homogeneous medium constants.
///
/// mu_s_prime and mu_D are derived from (mu_s, g) on construction and can
/// never be set on their own. The fluorescence lifetime is carried for
/// completeness; only the zero-lifetime model is supported.
class OpticalParams {
public:
    OpticalParams(double c_mm_per_ps, double mu_a, double mu_s, double g, double beta,
                  double tau_ps = 0.0);

    /// c = 0.219 mm/ps, mu_s = 10, g = 0.9 (mu_s' = 1), mu_a = 0.1, beta = 0.01.
    static OpticalParams tissue_defaults();

    double c() const noexcept { return c_; }
    double mu_a() const noexcept { return mu_a_; }
    double mu_s() const noexcept { return mu_s_; }
    double g() const noexcept { return g_; }
    double beta() const noexcept { return beta_; }
    double tau() const noexcept { return tau_; }
    double mu_s_prime() const noexcept { return mu_s_prime_; }
    double mu_D() const noexcept { return mu_D_; }
    /// c * mu_D, in mm^2/ps.
    double diffusivity() const noexcept { return c_ * mu_D_; }

    OpticalParams with_scattering(double mu_s) const;
    OpticalParams with_absorption(double mu_a) const;

    friend bool operator==(const OpticalParams&, const OpticalParams&) = default;

private:
    double c_, mu_a_, mu_s_, g_, beta_, tau_;
    double mu_s_prime_, mu_D_;
};

/// Point on the boundary plane x3 = 0.
struct BoundaryPoint {
    double x1 = 0.0;
    double x2 = 0.0;

    Vec3 lifted() const { return {x1, x2, 0.0}; }
    friend bool operator==(const BoundaryPoint&, const BoundaryPoint&) = default;
    friend auto operator<=>(const BoundaryPoint&, const BoundaryPoint&) = default;
};

struct SDPair {
    BoundaryPoint source;
    BoundaryPoint detector;

    SDPair swapped() const { return {detector, source}; }
    friend bool operator==(const SDPair&, const SDPair&) = default;
};

SDPair make_pair(BoundaryPoint source, BoundaryPoint detector);

/// Coefficients in increasing degree: c0 + c1*u + c2*u^2 + ...
struct Polynomial {
    std::vector<double> coeffs;

    double operator()(double u) const;
    bool is_constant() const;
    friend bool operator==(const Polynomial&, const Polynomial&) = default;
};

/// Axis-aligned box (lower[i], upper[i]) for i = 0, 1, 2.
struct Box {
    Vec3 lower{};
    Vec3 upper{};

    Vec3 center() const;
    double volume() const;
    friend bool operator==(const Box&, const Box&) = default;
};

Box cube(const Vec3& center, double side);

struct PointTarget {
    Vec3 center{};
    double concentration = 0.0;
    friend bool operator==(const PointTarget&, const PointTarget&) = default;
};

struct CuboidTarget {
    Box box;
    double concentration = 0.0;
    friend bool operator==(const CuboidTarget&, const CuboidTarget&) = default;
};

// Time-dependent targets are parametrized in normalized gate time u in [0, 1].
// The acquisition's GateWindow maps ps to u.

struct MovingCuboidTarget {
    std::array<Polynomial, 3> center;
    double side = 0.0;
    double concentration = 0.0;

    Box box_at(double u) const;
    friend bool operator==(const MovingCuboidTarget&, const MovingCuboidTarget&) = default;
};

struct GrowingCuboidTarget {
    Vec3 center{};
    Polynomial side;
    double concentration = 0.0;

    Box box_at(double u) const;
    friend bool operator==(const GrowingCuboidTarget&, const GrowingCuboidTarget&) = default;
};

using Target = std::variant<PointTarget, CuboidTarget, MovingCuboidTarget, GrowingCuboidTarget>;

double concentration_of(const Target& target);
bool is_time_dependent(const Target& target);

/// Throws ValidationError / GeometryError when a target violates its invariants.
void validate(const Target& target);

/// Maps acquisition time (ps) onto normalized gate time u = (t - start)/(end - start).
struct GateWindow {
    double start_ps = 0.0;
    double end_ps = 1.0;

    double normalized(double t_ps) const { return (t_ps - start_ps) / (end_ps - start_ps); }
    friend bool operator==(const GateWindow&, const GateWindow&) = default;
};

enum class Layout {
    Point4,         // (x_c1, x_c2, x_c3, P)
    Cuboid7,        // (a1, b1, a2, b2, a3, b3, P)
    Joint9,         // (mu_s, mu_a, a1, b1, a2, b2, a3, b3, P)
    GrowingCuboid,  // (x_c1, x_c2, x_c3, P, L_0, ..., L_n)
    MovingCuboid,   // (x_c1 coeffs..., x_c2 coeffs..., x_c3 coeffs..., L, P)
};

std::string_view to_string(Layout layout);
Layout layout_from_string(std::string_view name);

struct ParamVector {
    Layout layout = Layout::Cuboid7;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

/// Checks the length rule of the layout. Throws LayoutError.
void check_length(const ParamVector& v);

ParamVector encode(const Target& target, Layout layout);
/// Joint9 needs the medium as well; other layouts ignore `optical`.
ParamVector encode(const Target& target, Layout layout, const OpticalParams& optical);

/// Inverse of encode. Throws GeometryError naming the offending index.
Target decode(const ParamVector& v);

/// Medium seen by the forward model: Joint9 overrides (mu_s, mu_a), others return `base`.
OpticalParams effective_optics(const ParamVector& v, const OpticalParams& base);

struct TimeGrid {
    std::vector<double> times_ps;

    explicit TimeGrid(std::vector<double> times);
    static TimeGrid uniform(double start_ps, double step_ps, std::size_t count);

    std::size_t size() const { return times_ps.size(); }
    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Pairs, one TimeGrid per pair, and the gate used by time-dependent targets.
struct Acquisition {
    std::vector<SDPair> pairs;
    std::vector<TimeGrid> grids;
    GateWindow gate;

    /// Gate defaults to [0, latest sample time].
    static Acquisition make(std::vector<SDPair> pairs, std::vector<TimeGrid> grids);
    static Acquisition make(std::vector<SDPair> pairs, std::vector<TimeGrid> grids, GateWindow gate);

    std::size_t total_samples() const;
    Acquisition swapped() const;
};

/// Stacked data vector in (pair-major, time-minor) order.
struct Measurement {
    Acquisition acquisition;
    std::vector<double> data;
};

}  // namespace fdot
