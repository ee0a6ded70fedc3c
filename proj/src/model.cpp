#include "fdot/model.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "fdot/error.hpp"

namespace fdot {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ValidationError(field + ": " + what, field);
}

// Samples used to check polynomial geometry over u in [0, 1].
constexpr int kGeometrySamples = 64;

template <class F>
double min_over_unit_interval(F&& f) {
    double m = f(0.0);
    for (int i = 1; i <= kGeometrySamples; ++i) m = std::min(m, f(double(i) / kGeometrySamples));
    return m;
}

std::size_t moving_degree_count(std::size_t size) { return (size - 2) / 3; }

}  // namespace

double distance_squared(const Vec3& a, const Vec3& b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

OpticalParams::OpticalParams(double c, double mu_a, double mu_s, double g, double beta, double tau)
    : c_(c), mu_a_(mu_a), mu_s_(mu_s), g_(g), beta_(beta), tau_(tau) {
    require(std::isfinite(c) && c > 0, "c", "photon speed must be positive");
    require(std::isfinite(mu_a) && mu_a > 0, "mu_a", "absorption must be positive");
    require(std::isfinite(mu_s) && mu_s > 0, "mu_s", "scattering must be positive");
    require(g >= 0 && g < 1, "g", "anisotropy must lie in [0, 1)");
    require(std::isfinite(beta) && beta > 0, "beta", "Robin impedance must be positive");
    require(tau == 0.0, "tau", "only the zero-lifetime model is supported");
    mu_s_prime_ = mu_s_ * (1.0 - g_);
    mu_D_ = 1.0 / (3.0 * mu_s_ * (1.0 - g_));
}

OpticalParams OpticalParams::tissue_defaults() { return OpticalParams(0.219, 0.1, 10.0, 0.9, 0.01); }

OpticalParams OpticalParams::with_scattering(double mu_s) const {
    return OpticalParams(c_, mu_a_, mu_s, g_, beta_, tau_);
}

OpticalParams OpticalParams::with_absorption(double mu_a) const {
    return OpticalParams(c_, mu_a, mu_s_, g_, beta_, tau_);
}

SDPair make_pair(BoundaryPoint source, BoundaryPoint detector) {
    require(std::isfinite(source.x1) && std::isfinite(source.x2), "source", "non-finite coordinate");
    require(std::isfinite(detector.x1) && std::isfinite(detector.x2), "detector", "non-finite coordinate");
    require(!(source == detector), "pair", "source and detector coincide");
    return {source, detector};
}

double Polynomial::operator()(double u) const {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * u + *it;
    return acc;
}

bool Polynomial::is_constant() const {
    return std::all_of(coeffs.begin() + std::min<std::size_t>(1, coeffs.size()), coeffs.end(),
                       [](double c) { return c == 0.0; });
}

Vec3 Box::center() const {
    return {0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1]), 0.5 * (lower[2] + upper[2])};
}

double Box::volume() const {
    return (upper[0] - lower[0]) * (upper[1] - lower[1]) * (upper[2] - lower[2]);
}

Box cube(const Vec3& center, double side) {
    const double h = 0.5 * side;
    return {{center[0] - h, center[1] - h, center[2] - h}, {center[0] + h, center[1] + h, center[2] + h}};
}

Box MovingCuboidTarget::box_at(double u) const {
    return cube({center[0](u), center[1](u), center[2](u)}, side);
}

Box GrowingCuboidTarget::box_at(double u) const { return cube(center, side(u)); }

double concentration_of(const Target& target) {
    return std::visit([](const auto& t) { return t.concentration; }, target);
}

bool is_time_dependent(const Target& target) {
    return std::holds_alternative<MovingCuboidTarget>(target) ||
           std::holds_alternative<GrowingCuboidTarget>(target);
}

void validate(const Target& target) {
    const double P = concentration_of(target);
    require(std::isfinite(P) && P > 0, "concentration", "must be positive");
    std::visit(
        [](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, PointTarget>) {
                require(std::isfinite(t.center[0]) && std::isfinite(t.center[1]), "center",
                        "non-finite coordinate");
                require(std::isfinite(t.center[2]) && t.center[2] > 0, "center",
                        "point target must lie below the surface (x3 > 0)");
            } else if constexpr (std::is_same_v<T, CuboidTarget>) {
                for (std::size_t i = 0; i < 3; ++i) {
                    require(std::isfinite(t.box.lower[i]) && std::isfinite(t.box.upper[i]), "box",
                            "non-finite bound");
                    require(t.box.lower[i] < t.box.upper[i], "box", "lower bound must be below upper bound");
                }
                require(t.box.lower[2] > 0, "box", "cuboid must lie below the surface (a3 > 0)");
            } else if constexpr (std::is_same_v<T, MovingCuboidTarget>) {
                require(t.side > 0, "side", "must be positive");
                for (const auto& p : t.center) require(!p.coeffs.empty(), "center", "empty polynomial");
                const double depth = min_over_unit_interval([&](double u) { return t.center[2](u) - 0.5 * t.side; });
                require(depth > 0, "center", "moving cuboid leaves the medium inside the gate window");
            } else {
                require(!t.side.coeffs.empty(), "side", "empty polynomial");
                const double side = min_over_unit_interval([&](double u) { return t.side(u); });
                require(side > 0, "side", "side length must stay positive inside the gate window");
                const double depth = min_over_unit_interval([&](double u) { return t.center[2] - 0.5 * t.side(u); });
                require(depth > 0, "center", "growing cuboid leaves the medium inside the gate window");
            }
        },
        target);
}

std::string_view to_string(Layout layout) {
    switch (layout) {
        case Layout::Point4: return "point4";
        case Layout::Cuboid7: return "cuboid7";
        case Layout::Joint9: return "joint9";
        case Layout::GrowingCuboid: return "growing_cuboid";
        case Layout::MovingCuboid: return "moving_cuboid";
    }
    return "?";
}

Layout layout_from_string(std::string_view name) {
    for (Layout l : {Layout::Point4, Layout::Cuboid7, Layout::Joint9, Layout::GrowingCuboid, Layout::MovingCuboid})
        if (to_string(l) == name) return l;
    throw LayoutError("unknown layout '" + std::string(name) + "'", "layout");
}

void check_length(const ParamVector& v) {
    const std::size_t n = v.values.size();
    bool ok = false;
    switch (v.layout) {
        case Layout::Point4: ok = n == 4; break;
        case Layout::Cuboid7: ok = n == 7; break;
        case Layout::Joint9: ok = n == 9; break;
        case Layout::GrowingCuboid: ok = n >= 5; break;
        case Layout::MovingCuboid: ok = n >= 5 && (n - 2) % 3 == 0; break;
    }
    if (!ok)
        throw LayoutError("parameter vector of length " + std::to_string(n) + " does not fit layout " +
                              std::string(to_string(v.layout)),
                          "values");
}

namespace {

std::vector<double> box_values(const Box& b) {
    return {b.lower[0], b.upper[0], b.lower[1], b.upper[1], b.lower[2], b.upper[2]};
}

[[noreturn]] void mismatch(const Target& target, Layout layout) {
    static constexpr const char* names[] = {"point", "cuboid", "moving cuboid", "growing cuboid"};
    throw LayoutError(std::string(names[target.index()]) + " target cannot be encoded as " +
                          std::string(to_string(layout)),
                      "layout");
}

}  // namespace

ParamVector encode(const Target& target, Layout layout) {
    if (layout == Layout::Joint9)
        throw LayoutError("joint9 encoding needs optical parameters", "layout");
    return encode(target, layout, OpticalParams::tissue_defaults());
}

ParamVector encode(const Target& target, Layout layout, const OpticalParams& optical) {
    ParamVector v{layout, {}};
    switch (layout) {
        case Layout::Point4: {
            const auto* t = std::get_if<PointTarget>(&target);
            if (!t) mismatch(target, layout);
            v.values = {t->center[0], t->center[1], t->center[2], t->concentration};
            break;
        }
        case Layout::Cuboid7:
        case Layout::Joint9: {
            const auto* t = std::get_if<CuboidTarget>(&target);
            if (!t) mismatch(target, layout);
            if (layout == Layout::Joint9) v.values = {optical.mu_s(), optical.mu_a()};
            for (double x : box_values(t->box)) v.values.push_back(x);
            v.values.push_back(t->concentration);
            break;
        }
        case Layout::GrowingCuboid: {
            const auto* t = std::get_if<GrowingCuboidTarget>(&target);
            if (!t) mismatch(target, layout);
            v.values = {t->center[0], t->center[1], t->center[2], t->concentration};
            v.values.insert(v.values.end(), t->side.coeffs.begin(), t->side.coeffs.end());
            break;
        }
        case Layout::MovingCuboid: {
            const auto* t = std::get_if<MovingCuboidTarget>(&target);
            if (!t) mismatch(target, layout);
            const std::size_t n = t->center[0].coeffs.size();
            if (t->center[1].coeffs.size() != n || t->center[2].coeffs.size() != n)
                throw LayoutError("moving_cuboid encoding needs equal-degree center polynomials", "center");
            for (const auto& p : t->center) v.values.insert(v.values.end(), p.coeffs.begin(), p.coeffs.end());
            v.values.push_back(t->side);
            v.values.push_back(t->concentration);
            break;
        }
    }
    return v;
}

Target decode(const ParamVector& v) {
    check_length(v);
    const auto& x = v.values;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw GeometryError("non-finite parameter", i);

    auto positive = [&](std::size_t i, const char* what) {
        if (!(x[i] > 0)) throw GeometryError(std::string(what) + " must be positive", i);
    };

    switch (v.layout) {
        case Layout::Point4:
            positive(2, "depth x_c3");
            positive(3, "concentration P");
            return PointTarget{{x[0], x[1], x[2]}, x[3]};
        case Layout::Cuboid7:
        case Layout::Joint9: {
            const std::size_t o = v.layout == Layout::Joint9 ? 2 : 0;
            if (o) {
                positive(0, "mu_s");
                positive(1, "mu_a");
            }
            Box b;
            for (std::size_t i = 0; i < 3; ++i) {
                b.lower[i] = x[o + 2 * i];
                b.upper[i] = x[o + 2 * i + 1];
                if (!(b.lower[i] < b.upper[i]))
                    throw GeometryError("degenerate box: lower bound not below upper bound", o + 2 * i);
            }
            positive(o + 4, "a3");
            positive(o + 6, "concentration P");
            return CuboidTarget{b, x[o + 6]};
        }
        case Layout::GrowingCuboid: {
            positive(3, "concentration P");
            GrowingCuboidTarget t{{x[0], x[1], x[2]}, Polynomial{{x.begin() + 4, x.end()}}, x[3]};
            const double side = min_over_unit_interval([&](double u) { return t.side(u); });
            if (!(side > 0)) throw GeometryError("side length leaves (0, inf) inside the gate window", 4);
            const double depth = min_over_unit_interval([&](double u) { return t.center[2] - 0.5 * t.side(u); });
            if (!(depth > 0)) throw GeometryError("growing cuboid leaves the medium inside the gate window", 2);
            return t;
        }
        case Layout::MovingCuboid: {
            const std::size_t n = moving_degree_count(x.size());
            MovingCuboidTarget t;
            for (std::size_t k = 0; k < 3; ++k)
                t.center[k].coeffs.assign(x.begin() + k * n, x.begin() + (k + 1) * n);
            t.side = x[3 * n];
            t.concentration = x[3 * n + 1];
            positive(3 * n, "side L");
            positive(3 * n + 1, "concentration P");
            const double depth = min_over_unit_interval([&](double u) { return t.center[2](u) - 0.5 * t.side; });
            if (!(depth > 0)) throw GeometryError("moving cuboid leaves the medium inside the gate window", 2 * n);
            return t;
        }
    }
    throw LayoutError("unreachable layout", "layout");
}

OpticalParams effective_optics(const ParamVector& v, const OpticalParams& base) {
    if (v.layout != Layout::Joint9) return base;
    check_length(v);
    return OpticalParams(base.c(), v.values[1], v.values[0], base.g(), base.beta(), base.tau());
}

TimeGrid::TimeGrid(std::vector<double> times) : times_ps(std::move(times)) {
    for (std::size_t i = 0; i < times_ps.size(); ++i) {
        require(std::isfinite(times_ps[i]) && times_ps[i] > 0, "time_grid", "sample times must be positive");
        if (i > 0) require(times_ps[i] > times_ps[i - 1], "time_grid", "sample times must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(double start_ps, double step_ps, std::size_t count) {
    std::vector<double> t(count);
    for (std::size_t i = 0; i < count; ++i) t[i] = start_ps + step_ps * double(i);
    return TimeGrid(std::move(t));
}

Acquisition Acquisition::make(std::vector<SDPair> pairs, std::vector<TimeGrid> grids) {
    double latest = 0.0;
    for (const auto& g : grids)
        if (!g.times_ps.empty()) latest = std::max(latest, g.times_ps.back());
    return make(std::move(pairs), std::move(grids), GateWindow{0.0, latest > 0 ? latest : 1.0});
}

Acquisition Acquisition::make(std::vector<SDPair> pairs, std::vector<TimeGrid> grids, GateWindow gate) {
    require(pairs.size() == grids.size(), "time_grids", "need exactly one time grid per source-detector pair");
    require(gate.end_ps > gate.start_ps, "gate", "gate window must have positive length");
    return Acquisition{std::move(pairs), std::move(grids), gate};
}

std::size_t Acquisition::total_samples() const {
    std::size_t n = 0;
    for (const auto& g : grids) n += g.size();
    return n;
}

Acquisition Acquisition::swapped() const {
    Acquisition a = *this;
    for (auto& p : a.pairs) p = p.swapped();
    return a;
}

}  // namespace fdot
