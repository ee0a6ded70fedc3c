#include "fdot/forward.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "fdot/error.hpp"
#include "fdot/special.hpp"

namespace fdot {

namespace {

using std::numbers::pi;

// erf(hi) - erf(lo) without cancellation in the tails.
double erf_difference(double lo, double hi) {
    if (lo >= 0) return std::erfc(lo) - std::erfc(hi);
    if (hi <= 0) return std::erfc(-hi) - std::erfc(-lo);
    return std::erf(hi) - std::erf(lo);
}

void check_time(double t_ps) {
    if (!(t_ps > 0) || !std::isfinite(t_ps)) throw DomainError("signal time must be positive", "t");
}

// Breakpoints on sigma = s/t in [0, 1]. The exponent -(A/(1-sigma) + B/sigma)/t peaks at
// sqrt(B)/(sqrt(A)+sqrt(B)); near the ends sigma^(-3/2) exp(-b/sigma) peaks at 2b/3.
std::vector<double> convolution_breaks(double A, double B, double t) {
    std::vector<double> b{0.0, 1.0};
    const double rA = std::sqrt(A), rB = std::sqrt(B);
    if (rA + rB > 0) b.push_back(rB / (rA + rB));
    const double near_source = 2.0 * B / (3.0 * t);
    const double near_detector = 1.0 - 2.0 * A / (3.0 * t);
    if (near_source > 1e-12 && near_source < 1.0) b.push_back(near_source);
    if (near_detector > 0.0 && near_detector < 1.0 - 1e-12) b.push_back(near_detector);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(), [](double x, double y) { return std::abs(x - y) < 1e-9; }), b.end());
    if (b.back() != 1.0) b.back() = 1.0;
    return b;
}

struct Medium {
    double D;     // c mu_D
    double beta;
};

// exp(-|x_d - x_s|_horizontal^2 / (4 D t)), left over after merging the two horizontal Gaussians.
double horizontal_prefactor(const SDPair& pair, double t, double D) {
    const double dx1 = pair.detector.x1 - pair.source.x1;
    const double dx2 = pair.detector.x2 - pair.source.x2;
    return std::exp(-(dx1 * dx1 + dx2 * dx2) / (4.0 * D * t));
}

bool box_inside_medium(const Box& box) {
    for (std::size_t i = 0; i < 3; ++i)
        if (!(box.lower[i] < box.upper[i])) return false;
    return box.lower[2] > 0;
}

// Per-sigma quantities shared by every box evaluated at the same node. The two
// horizontal Gaussians multiply to one Gaussian of variance v and mean m_i per
// axis, integrated in closed form; depth is integrated numerically.
struct SigmaFrame {
    double s = 0.0, tau = 0.0;
    double width = 0.0, mean1 = 0.0, mean2 = 0.0, gauss_norm = 0.0;
    double k = 0.0, log_time = 0.0;
    Medium m{};

    SigmaFrame(const SDPair& pair, double t, double sigma, Medium med) : m(med) {
        s = t * sigma;
        tau = t - s;
        if (!(s > 0) || !(tau > 0)) return;
        const double v = 2.0 * m.D * s * tau / t;
        width = std::sqrt(2.0 * v);
        mean1 = (pair.detector.x1 * s + pair.source.x1 * tau) / t;
        mean2 = (pair.detector.x2 * s + pair.source.x2 * tau) / t;
        gauss_norm = std::sqrt(0.5 * pi * v);
        k = t / (4.0 * m.D * s * tau);
        log_time = -1.5 * std::log(s * tau);
    }

    bool inside() const { return s > 0 && tau > 0; }

    double horizontal(const Box& box) const {
        const double h1 = erf_difference((box.lower[0] - mean1) / width, (box.upper[0] - mean1) / width);
        const double h2 = erf_difference((box.lower[1] - mean2) / width, (box.upper[1] - mean2) / width);
        return gauss_norm * gauss_norm * h1 * h2;
    }

    double depth_density(double y) const {
        return std::exp(log_time - k * y * y) * k3_unchecked(y, tau, m.beta, m.D) * k3_unchecked(y, s, m.beta, m.D);
    }

    double depth(double from, double to, double tol, int max_panels) const {
        auto f = [this](double y) { return depth_density(y); };
        return integrate_adaptive(f, from, to, tol, 0.0, max_panels).value;
    }

    // Signed integral over a thin slab [from, to]; falls back to adaptive when it is not thin.
    double sliver(double from, double to, double tol, int max_panels) const {
        if (from == to) return 0.0;
        if (std::abs(to - from) > 1e-2) {
            return from < to ? depth(from, to, tol, max_panels) : -depth(to, from, tol, max_panels);
        }
        static const GaussLegendreRule rule = gauss_legendre(4);
        const double mid = 0.5 * (from + to), half = 0.5 * (to - from);
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * depth_density(mid + half * rule.nodes[i]);
        return acc * half;
    }
};

template <class BoxAt>
QuadratureResult integrate_box(const SDPair& pair, double t, const OpticalParams& p, const QuadratureSpec& q,
                               BoxAt box_at, const Box& reference) {
    const Medium med{p.diffusivity(), p.beta()};
    const PeakConstants pc = peak_constants(pair, reference.center(), p);
    const auto breaks = convolution_breaks(pc.A_ps, pc.B_ps, t);
    const double prefactor = horizontal_prefactor(pair, t, med.D);
    const double depth_tol = 0.1 * q.rel_tol;
    auto f = [&](double sigma) {
        const SigmaFrame frame(pair, t, sigma, med);
        if (!frame.inside()) return 0.0;
        const Box box = box_at(frame.s);
        const double horizontal = prefactor * frame.horizontal(box);
        if (horizontal == 0.0) return 0.0;
        return horizontal * frame.depth(box.lower[2], box.upper[2], depth_tol, q.max_subdivisions);
    };
    auto r = integrate_adaptive(f, std::span<const double>(breaks), q.rel_tol, q.abs_tol, q.max_subdivisions);
    const double scale = emission_prefactor(t, p) * t;
    r.value *= scale;
    r.error *= scale;
    return r;
}

double cuboid_separable(const SDPair& pair, const CuboidTarget& target, double t, const OpticalParams& p,
                        const QuadratureSpec& q) {
    const Box box = target.box;
    const auto r = integrate_box(pair, t, p, q, [&box](double) { return box; }, box);
    return target.concentration * r.value;
}

}  // namespace

void validate(const QuadratureSpec& q) {
    if (!(q.rel_tol > 0)) throw ValidationError("rel_tol must be positive", "rel_tol");
    if (!(q.abs_tol >= 0)) throw ValidationError("abs_tol must be non-negative", "abs_tol");
    if (q.max_subdivisions < 1) throw ValidationError("max_subdivisions must be at least 1", "max_subdivisions");
    if (q.volume_nodes_per_axis < 2)
        throw ValidationError("volume_nodes_per_axis must be at least 2", "volume_nodes_per_axis");
}

PeakConstants peak_constants(const SDPair& pair, const Vec3& center, const OpticalParams& p) {
    const double four_d = 4.0 * p.diffusivity();
    return {distance_squared(pair.detector.lifted(), center) / four_d,
            distance_squared(pair.source.lifted(), center) / four_d};
}

double emission_prefactor(double t_ps, const OpticalParams& p) {
    return std::exp(-p.c() * p.mu_a() * t_ps) / (16.0 * pi * pi * pi * p.c() * p.mu_D() * p.mu_D());
}

QuadratureResult tpsf_point_estimate(const SDPair& pair, const PointTarget& target, double t,
                                     const OpticalParams& p, const QuadratureSpec& q) {
    check_time(t);
    if (!(target.center[2] > 0)) throw DomainError("point target must lie below the surface", "center");
    const double D = p.diffusivity();
    const double beta = p.beta();
    const double x3 = target.center[2];
    const PeakConstants pc = peak_constants(pair, target.center, p);
    auto f = [&](double sigma) {
        const double s = t * sigma;
        const double tau = t - s;
        if (!(s > 0) || !(tau > 0)) return 0.0;
        const double e = -1.5 * std::log(s * tau) - pc.A_ps / tau - pc.B_ps / s;
        return std::exp(e) * k3_unchecked(x3, tau, beta, D) * k3_unchecked(x3, s, beta, D);
    };
    const auto breaks = convolution_breaks(pc.A_ps, pc.B_ps, t);
    auto r = integrate_adaptive(f, std::span<const double>(breaks), q.rel_tol, q.abs_tol, q.max_subdivisions);
    const double scale = emission_prefactor(t, p) * target.concentration * t;
    r.value *= scale;
    r.error *= scale;
    return r;
}

double tpsf_point(const SDPair& pair, const PointTarget& target, double t, const OpticalParams& p,
                  const QuadratureSpec& q) {
    return tpsf_point_estimate(pair, target, t, p, q).value;
}

double tpsf_cuboid(const SDPair& pair, const CuboidTarget& target, double t, const OpticalParams& p,
                   const QuadratureSpec& q) {
    check_time(t);
    if (!box_inside_medium(target.box)) throw DomainError("cuboid is degenerate or above the surface", "box");
    if (q.cuboid_rule == CuboidRule::TensorGaussLegendre) return tpsf_cuboid_tensor(pair, target, t, p, q);
    return cuboid_separable(pair, target, t, p, q);
}

double tpsf_cuboid_tensor(const SDPair& pair, const CuboidTarget& target, double t, const OpticalParams& p,
                          const QuadratureSpec& q) {
    check_time(t);
    const Box& box = target.box;
    auto tensor = [&](int n) {
        const auto rule = gauss_legendre(n);
        std::array<std::vector<double>, 3> x;
        std::array<double, 3> half{};
        for (std::size_t d = 0; d < 3; ++d) {
            half[d] = 0.5 * (box.upper[d] - box.lower[d]);
            const double mid = 0.5 * (box.upper[d] + box.lower[d]);
            for (double node : rule.nodes) x[d].push_back(mid + half[d] * node);
        }
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const PointTarget pt{{x[0][i], x[1][j], x[2][k]}, 1.0};
                    acc += rule.weights[i] * rule.weights[j] * rule.weights[k] * tpsf_point(pair, pt, t, p, q);
                }
        return acc * half[0] * half[1] * half[2] * target.concentration;
    };
    int n = q.volume_nodes_per_axis;
    double previous = tensor(n);
    for (; n <= 64; n *= 2) {
        const double next = tensor(2 * n);
        if (std::abs(next - previous) <= q.rel_tol * std::abs(next)) return next;
        previous = next;
    }
    throw QuadratureError("tensor Gauss-Legendre volume rule did not converge", std::abs(previous), previous);
}

double tpsf_timedependent(const SDPair& pair, const Target& target, double t, const OpticalParams& p,
                          const QuadratureSpec& q, const GateWindow& gate) {
    check_time(t);
    auto run = [&](const auto& tgt) {
        auto box_at = [&tgt, &gate](double s) {
            const Box b = tgt.box_at(gate.normalized(s));
            if (!box_inside_medium(b))
                throw DomainError("time-dependent target leaves the medium at emission time " + std::to_string(s) +
                                      " ps",
                                  "target");
            return b;
        };
        const Box reference = box_at(0.5 * t);
        return tgt.concentration * integrate_box(pair, t, p, q, box_at, reference).value;
    };
    if (const auto* m = std::get_if<MovingCuboidTarget>(&target)) return run(*m);
    if (const auto* g = std::get_if<GrowingCuboidTarget>(&target)) return run(*g);
    throw ValidationError("tpsf_timedependent needs a moving or growing cuboid", "target");
}

double tpsf(const SDPair& pair, const Target& target, double t, const OpticalParams& p, const QuadratureSpec& q,
            const GateWindow& gate) {
    if (const auto* pt = std::get_if<PointTarget>(&target)) return tpsf_point(pair, *pt, t, p, q);
    if (const auto* cb = std::get_if<CuboidTarget>(&target)) return tpsf_cuboid(pair, *cb, t, p, q);
    return tpsf_timedependent(pair, target, t, p, q, gate);
}

std::vector<double> simulate(const Target& target, const Acquisition& acquisition, const OpticalParams& p,
                             const QuadratureSpec& q) {
    std::vector<double> data;
    data.reserve(acquisition.total_samples());
    for (std::size_t k = 0; k < acquisition.pairs.size(); ++k)
        for (double t : acquisition.grids[k].times_ps)
            data.push_back(tpsf(acquisition.pairs[k], target, t, p, q, acquisition.gate));
    return data;
}

Measurement measure(const ParamVector& params, const Acquisition& acquisition, const OpticalParams& p,
                    const QuadratureSpec& q) {
    const Target target = decode(params);
    const OpticalParams optics = effective_optics(params, p);
    return Measurement{acquisition, simulate(target, acquisition, optics, q)};
}

namespace {

// Geometry of one batch member as a function of emission time.
struct BatchMember {
    std::size_t index;
    Target target;
    OpticalParams optics;

    Box box_at(double s, const GateWindow& gate) const {
        if (const auto* c = std::get_if<CuboidTarget>(&target)) return c->box;
        const Box b = std::holds_alternative<MovingCuboidTarget>(target)
                          ? std::get<MovingCuboidTarget>(target).box_at(gate.normalized(s))
                          : std::get<GrowingCuboidTarget>(target).box_at(gate.normalized(s));
        if (!box_inside_medium(b))
            throw DomainError("time-dependent target leaves the medium at emission time " + std::to_string(s) + " ps",
                              "target");
        return b;
    }
};

bool same_horizontal(const Box& a, const Box& b) {
    return a.lower[0] == b.lower[0] && a.upper[0] == b.upper[0] && a.lower[1] == b.lower[1] &&
           a.upper[1] == b.upper[1];
}

void simulate_group(const std::vector<BatchMember>& group, const Acquisition& acq, const QuadratureSpec& q,
                    std::vector<std::vector<double>>& out) {
    const OpticalParams& base_optics = group.front().optics;
    const Medium med{base_optics.diffusivity(), base_optics.beta()};
    const double depth_tol = 0.1 * q.rel_tol;
    const std::size_t n = group.size();
    std::vector<Box> boxes(n);

    std::size_t row = 0;
    for (std::size_t k = 0; k < acq.pairs.size(); ++k) {
        const SDPair& pair = acq.pairs[k];
        for (double t : acq.grids[k].times_ps) {
            check_time(t);
            const Box reference = group.front().box_at(0.5 * t, acq.gate);
            const PeakConstants pc = peak_constants(pair, reference.center(), base_optics);
            const auto breaks = convolution_breaks(pc.A_ps, pc.B_ps, t);
            const double prefactor = horizontal_prefactor(pair, t, med.D);

            auto f = [&](double sigma, std::span<double> values) {
                const SigmaFrame frame(pair, t, sigma, med);
                if (!frame.inside()) {
                    std::fill(values.begin(), values.end(), 0.0);
                    return;
                }
                for (std::size_t j = 0; j < n; ++j) boxes[j] = group[j].box_at(frame.s, acq.gate);
                const Box& b0 = boxes[0];
                const double h0 = prefactor * frame.horizontal(b0);
                const double d0 = frame.depth(b0.lower[2], b0.upper[2], depth_tol, q.max_subdivisions);
                values[0] = h0 * d0;
                for (std::size_t j = 1; j < n; ++j) {
                    const Box& bj = boxes[j];
                    const double hj = same_horizontal(bj, b0) ? h0 : prefactor * frame.horizontal(bj);
                    const double dj = d0 + frame.sliver(b0.upper[2], bj.upper[2], depth_tol, q.max_subdivisions) -
                                      frame.sliver(b0.lower[2], bj.lower[2], depth_tol, q.max_subdivisions);
                    values[j] = hj * dj;
                }
            };
            const auto integrals = integrate_adaptive_shared(f, std::span<const double>(breaks), n, q.rel_tol,
                                                             q.abs_tol, q.max_subdivisions);
            for (std::size_t j = 0; j < n; ++j) {
                const double scale = emission_prefactor(t, group[j].optics) * t * concentration_of(group[j].target);
                out[group[j].index][row] = scale * integrals[j];
            }
            ++row;
        }
    }
}

}  // namespace

std::vector<std::vector<double>> measure_batch(std::span<const ParamVector> params, const Acquisition& acquisition,
                                               const OpticalParams& p, const QuadratureSpec& q) {
    const std::size_t samples = acquisition.total_samples();
    std::vector<std::vector<double>> out(params.size(), std::vector<double>(samples));

    // Group box targets by medium diffusion; mu_a only enters through C(t).
    std::vector<std::vector<BatchMember>> groups;
    for (std::size_t i = 0; i < params.size(); ++i) {
        BatchMember member{i, decode(params[i]), effective_optics(params[i], p)};
        if (std::holds_alternative<PointTarget>(member.target)) {
            out[i] = simulate(member.target, acquisition, member.optics, q);
            continue;
        }
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            const auto& o = g.front().optics;
            return o.mu_s() == member.optics.mu_s() && o.g() == member.optics.g() && o.c() == member.optics.c() &&
                   o.beta() == member.optics.beta();
        });
        if (it == groups.end()) {
            groups.push_back({std::move(member)});
        } else {
            it->push_back(std::move(member));
        }
    }
    for (const auto& g : groups) simulate_group(g, acquisition, q, out);
    return out;
}

GaussLegendreRule gauss_legendre(int n) {
    if (n < 1) throw ValidationError("Gauss-Legendre rule needs at least one node", "n");
    GaussLegendreRule rule{std::vector<double>(n), std::vector<double>(n)};
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) p0 = 1.0, p1 = x;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace fdot
