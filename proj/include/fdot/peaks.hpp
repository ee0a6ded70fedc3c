#pragma once

// Peak features of sampled TPSFs, their closed-form approximations, and the
// three-step localization: horizontal position from the strongest pair of a
// fixed-separation scan, depth from its peak time, concentration from its peak
// intensity.

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fdot/forward.hpp"
#include "fdot/model.hpp"

namespace fdot {

struct PeakFeatures {
    double t_peak_ps = 0.0;
    double u_peak = 0.0;
    SDPair pair;
    // Maximum sits on the first or last sample; no refinement was possible.
    bool at_boundary = false;
};

/// Argmax refined by the parabola through the maximum and its two neighbours.
/// Needs at least 3 samples with strictly increasing times.
PeakFeatures detect_peak(std::span<const double> times_ps, std::span<const double> values, const SDPair& pair = {});

/// Peak of a unimodal signal f(t): scan [start, end] at `pitch`, stop once the
/// signal has fallen below half of its running maximum, refine the sampled
/// maximum with a parabola. Throws PeakSearchError when the maximum is not
/// bracketed inside the window.
PeakFeatures search_peak(const std::function<double(double)>& f, double start_ps, double end_ps, double pitch_ps);

/// search_peak followed by Brent's method on the bracketing samples, for
/// reference peaks accurate to about 1e-8 relative.
PeakFeatures exact_peak(const std::function<double(double)>& f, double start_ps, double end_ps, double pitch_ps);

/// t_peak ~ (-3 + sqrt(9 + 32 c mu_a (A + B))) / (4 c mu_a).
double peak_time_approx(const PeakConstants& pc, const OpticalParams& p);

/// u_peak ~ C(t) P (sqrt(pi/A) + sqrt(pi/B)) exp(-(2A + 2B)/t) t^(-3/2) at t = t_peak.
double peak_intensity_approx(const PeakConstants& pc, double t_peak_ps, double concentration, const OpticalParams& p);

/// Depth of a target centred under a pair of separation d with measured peak time t*.
/// Exact inverse of peak_time_approx when A = B. Throws PeakSearchError if the
/// radicand is not positive.
double depth_from_peak_time(double t_star_ps, double separation_mm, const OpticalParams& p);

/// Concentration that makes peak_intensity_approx reproduce u*.
double concentration_from_peak(double u_star, const PeakConstants& pc, double t_star_ps, const OpticalParams& p);

/// |A - B| / (A + B); the closed forms degrade as this grows.
double leg_asymmetry(const PeakConstants& pc);
inline constexpr double kAsymmetryWarning = 0.2;

/// Source-detector pairs of fixed separation and orientation, one per midpoint.
struct ScanGrid {
    std::vector<BoundaryPoint> midpoints;
    double separation_mm = 0.0;
    std::array<double, 2> orientation{1.0, 0.0};

    /// Square grid of (2n+1)^2 midpoints around `center` with spacing `pitch_mm`.
    static ScanGrid square(BoundaryPoint center, int half_count, double pitch_mm, double separation_mm,
                           std::array<double, 2> orientation = {1.0, 0.0});

    SDPair pair_at(std::size_t i) const;
    void validate() const;
};

/// Sampled peaks of `target` for every scan pair on `grid`.
std::vector<PeakFeatures> scan_peaks(const ScanGrid& scan, const Target& target, const TimeGrid& grid,
                                     const OpticalParams& p, const QuadratureSpec& q);

/// Index of the strongest peak; ties go to the lexicographically smallest midpoint.
std::size_t strongest_midpoint(const ScanGrid& scan, std::span<const PeakFeatures> peaks);

BoundaryPoint locate_horizontal(const ScanGrid& scan, std::span<const PeakFeatures> peaks);

struct Localization {
    Vec3 center{};
    double concentration = 0.0;
    // Sub-grid estimate of the horizontal maximum; only used for the validity guard.
    Vec3 refined_center{};
    PeakFeatures winner;
    PeakConstants constants;
    double asymmetry = 0.0;
    std::vector<std::string> warnings;
};

/// Steps 1-3 on already detected scan peaks.
Localization localize(const ScanGrid& scan, std::span<const PeakFeatures> peaks, const OpticalParams& p);

}  // namespace fdot
