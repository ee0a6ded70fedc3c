#include "fdot/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "fdot/error.hpp"

namespace fdot {

using std::numbers::pi;

PeakFeatures detect_peak(std::span<const double> t, std::span<const double> u, const SDPair& pair) {
    if (t.size() != u.size()) throw ValidationError("times and values differ in length", "samples");
    if (t.size() < 3) throw ValidationError("peak detection needs at least 3 samples", "samples");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw ValidationError("sample times must be strictly increasing", "samples");

    std::size_t best = 0;
    for (std::size_t i = 1; i < u.size(); ++i)
        if (u[i] > u[best]) best = i;

    PeakFeatures peak{t[best], u[best], pair, false};
    if (best == 0 || best + 1 == u.size()) {
        peak.at_boundary = true;
        return peak;
    }
    const double t0 = t[best - 1], t1 = t[best], t2 = t[best + 1];
    const double u0 = u[best - 1], u1 = u[best], u2 = u[best + 1];
    const double d01 = (u1 - u0) / (t1 - t0);
    const double d12 = (u2 - u1) / (t2 - t1);
    const double curvature = (d12 - d01) / (t2 - t0);
    if (!(curvature < 0)) return peak;
    const double vertex = 0.5 * (t0 + t1) - d01 / (2.0 * curvature);
    peak.t_peak_ps = vertex;
    peak.u_peak = u0 + d01 * (vertex - t0) + curvature * (vertex - t0) * (vertex - t1);
    return peak;
}

PeakFeatures search_peak(const std::function<double(double)>& f, double start, double end, double pitch) {
    if (!(start > 0) || !(end > start) || !(pitch > 0))
        throw ValidationError("peak search window must satisfy 0 < start < end and pitch > 0", "search");
    std::vector<double> t, u;
    double best = -INFINITY;
    const auto n = std::size_t(std::floor((end - start) / pitch)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = start + double(i) * pitch;
        const double ui = f(ti);
        t.push_back(ti);
        u.push_back(ui);
        best = std::max(best, ui);
        if (best > 0 && ui < 0.5 * best) break;
    }
    if (t.size() < 3) throw PeakSearchError("peak search window holds fewer than 3 samples");
    PeakFeatures peak = detect_peak(t, u);
    if (peak.at_boundary || !(peak.u_peak > 0)) {
        std::ostringstream msg;
        msg << "signal maximum is not bracketed in [" << start << ", " << end << "] ps";
        throw PeakSearchError(msg.str());
    }
    return peak;
}

PeakFeatures exact_peak(const std::function<double(double)>& f, double start, double end, double pitch) {
    const PeakFeatures coarse = search_peak(f, start, end, pitch);
    const double lo = std::max(start, coarse.t_peak_ps - pitch);
    const double hi = std::min(end, coarse.t_peak_ps + pitch);
    std::uintmax_t iterations = 200;
    const auto [t_star, neg_u] = boost::math::tools::brent_find_minima(
        [&f](double t) { return -f(t); }, lo, hi, std::numeric_limits<double>::digits / 2 + 4, iterations);
    return PeakFeatures{t_star, -neg_u, {}, false};
}

double peak_time_approx(const PeakConstants& pc, const OpticalParams& p) {
    const double cm = p.c() * p.mu_a();
    const double sum = pc.A_ps + pc.B_ps;
    // (-3 + sqrt(9 + 32 cm S)) / (4 cm), rewritten to avoid cancellation for small S.
    const double x = 32.0 * cm * sum;
    return x / (4.0 * cm * (3.0 + std::sqrt(9.0 + x)));
}

double peak_intensity_approx(const PeakConstants& pc, double t_peak, double concentration, const OpticalParams& p) {
    const double legs = std::sqrt(pi / pc.A_ps) + std::sqrt(pi / pc.B_ps);
    return emission_prefactor(t_peak, p) * concentration * legs * std::exp(-2.0 * (pc.A_ps + pc.B_ps) / t_peak) *
           std::pow(t_peak, -1.5);
}

double depth_from_peak_time(double t_star, double separation, const OpticalParams& p) {
    if (!(t_star > 0)) throw DomainError("peak time must be positive", "t_peak");
    const double c = p.c();
    const double radicand = c * c * p.mu_D() * p.mu_a() * t_star * t_star + 1.5 * c * p.mu_D() * t_star -
                            0.25 * separation * separation;
    if (!(radicand > 0)) {
        std::ostringstream msg;
        msg << "peak time " << t_star << " ps is too early for separation " << separation
            << " mm (target too shallow or peak corrupted)";
        throw PeakSearchError(msg.str());
    }
    return std::sqrt(radicand);
}

double concentration_from_peak(double u_star, const PeakConstants& pc, double t_star, const OpticalParams& p) {
    return u_star / peak_intensity_approx(pc, t_star, 1.0, p);
}

double leg_asymmetry(const PeakConstants& pc) { return std::abs(pc.A_ps - pc.B_ps) / (pc.A_ps + pc.B_ps); }

ScanGrid ScanGrid::square(BoundaryPoint center, int half_count, double pitch, double separation,
                          std::array<double, 2> orientation) {
    ScanGrid grid;
    grid.separation_mm = separation;
    const double norm = std::hypot(orientation[0], orientation[1]);
    grid.orientation = {orientation[0] / norm, orientation[1] / norm};
    for (int i = -half_count; i <= half_count; ++i)
        for (int j = -half_count; j <= half_count; ++j)
            grid.midpoints.push_back({center.x1 + i * pitch, center.x2 + j * pitch});
    return grid;
}

SDPair ScanGrid::pair_at(std::size_t i) const {
    const BoundaryPoint& m = midpoints.at(i);
    const double h = 0.5 * separation_mm;
    return {{m.x1 - h * orientation[0], m.x2 - h * orientation[1]},
            {m.x1 + h * orientation[0], m.x2 + h * orientation[1]}};
}

void ScanGrid::validate() const {
    if (midpoints.empty()) throw ValidationError("scan grid has no midpoints", "scan");
    if (!(separation_mm > 0)) throw ValidationError("scan separation must be positive", "separation");
    if (!(std::abs(std::hypot(orientation[0], orientation[1]) - 1.0) < 1e-12))
        throw ValidationError("scan orientation must be a unit vector", "orientation");
}

std::vector<PeakFeatures> scan_peaks(const ScanGrid& scan, const Target& target, const TimeGrid& grid,
                                     const OpticalParams& p, const QuadratureSpec& q) {
    scan.validate();
    std::vector<PeakFeatures> peaks;
    peaks.reserve(scan.midpoints.size());
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < scan.midpoints.size(); ++i) {
        const SDPair pair = scan.pair_at(i);
        for (std::size_t j = 0; j < grid.size(); ++j) values[j] = tpsf(pair, target, grid.times_ps[j], p, q);
        peaks.push_back(detect_peak(grid.times_ps, values, pair));
    }
    return peaks;
}

std::size_t strongest_midpoint(const ScanGrid& scan, std::span<const PeakFeatures> peaks) {
    scan.validate();
    if (peaks.size() != scan.midpoints.size())
        throw ValidationError("need one peak per scan midpoint", "peaks");
    std::size_t best = 0;
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        if (peaks[i].u_peak > peaks[best].u_peak ||
            (peaks[i].u_peak == peaks[best].u_peak && scan.midpoints[i] < scan.midpoints[best]))
            best = i;
    }
    return best;
}

BoundaryPoint locate_horizontal(const ScanGrid& scan, std::span<const PeakFeatures> peaks) {
    return scan.midpoints[strongest_midpoint(scan, peaks)];
}

namespace {

// Sub-grid offset of the intensity maximum along one axis: parabola through
// log-intensities of the nearest scan neighbours on either side. Zero when a
// neighbour is missing.
double subgrid_offset(const ScanGrid& scan, std::span<const PeakFeatures> peaks, std::size_t best, int axis) {
    const BoundaryPoint m = scan.midpoints[best];
    auto coord = [axis](const BoundaryPoint& b) { return axis == 0 ? b.x1 : b.x2; };
    auto other = [axis](const BoundaryPoint& b) { return axis == 0 ? b.x2 : b.x1; };
    std::ptrdiff_t lo = -1, hi = -1;
    for (std::size_t i = 0; i < scan.midpoints.size(); ++i) {
        const BoundaryPoint& b = scan.midpoints[i];
        if (i == best || other(b) != other(m) || !(peaks[i].u_peak > 0)) continue;
        if (coord(b) < coord(m) && (lo < 0 || coord(b) > coord(scan.midpoints[lo]))) lo = std::ptrdiff_t(i);
        if (coord(b) > coord(m) && (hi < 0 || coord(b) < coord(scan.midpoints[hi]))) hi = std::ptrdiff_t(i);
    }
    if (lo < 0 || hi < 0) return 0.0;
    const std::array<double, 3> x{coord(scan.midpoints[lo]), coord(m), coord(scan.midpoints[hi])};
    const std::array<double, 3> y{std::log(peaks[lo].u_peak), std::log(peaks[best].u_peak),
                                  std::log(peaks[hi].u_peak)};
    const PeakFeatures v = detect_peak(x, y);
    return std::clamp(v.t_peak_ps - x[1], 0.5 * (x[0] - x[1]), 0.5 * (x[2] - x[1]));
}

}  // namespace

Localization localize(const ScanGrid& scan, std::span<const PeakFeatures> peaks, const OpticalParams& p) {
    const std::size_t best = strongest_midpoint(scan, peaks);
    const PeakFeatures& w = peaks[best];
    Localization out;
    out.winner = w;
    if (w.at_boundary)
        out.warnings.push_back("winning TPSF peaks at the edge of its sampling window; peak time is unrefined");

    const BoundaryPoint mid = scan.midpoints[best];
    const double depth = depth_from_peak_time(w.t_peak_ps, scan.separation_mm, p);
    out.center = {mid.x1, mid.x2, depth};
    out.constants = peak_constants(w.pair, out.center, p);
    // The closed forms assume the target is centred under the pair; judge that
    // assumption against the sub-grid estimate of the intensity maximum.
    out.refined_center = {mid.x1 + subgrid_offset(scan, peaks, best, 0), mid.x2 + subgrid_offset(scan, peaks, best, 1),
                          depth};
    out.asymmetry = leg_asymmetry(peak_constants(w.pair, out.refined_center, p));
    if (out.asymmetry > kAsymmetryWarning) {
        std::ostringstream msg;
        msg << "|A-B|/(A+B) = " << out.asymmetry << " exceeds " << kAsymmetryWarning
            << "; closed-form peak formulas are unreliable for this pair";
        out.warnings.push_back(msg.str());
    }
    out.concentration = concentration_from_peak(w.u_peak, out.constants, w.t_peak_ps, p);
    return out;
}

}  // namespace fdot
