#pragma once

// Iterative Tikhonov-regularized least squares for K(a) = h:
//
//   (alpha I + G^T G) da_j = G^T (h - K(a_j)),   a_{j+1} = a_j + da_j,
//
// stopped once |da_j| <= eta. G is the finite-difference sensitivity matrix.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fdot/forward.hpp"
#include "fdot/model.hpp"

namespace fdot {

struct NoiseSpec {
    double epsilon = 0.0;  // relative noise level
    std::uint64_t seed = 0;
};

void validate(const NoiseSpec& noise);

/// h_q (1 + zeta_q epsilon) with zeta_q i.i.d. standard normal, drawn from a
/// generator seeded by `noise.seed`.
std::vector<double> add_noise(const std::vector<double>& h, const NoiseSpec& noise);
Measurement add_noise(const Measurement& h, const NoiseSpec& noise);

struct AlphaStrategy {
    enum class Kind { Fixed, Discrepancy };
    Kind kind = Kind::Discrepancy;
    double alpha = 0.0;            // Fixed only
    double safety = 1.01;          // Discrepancy: accept |r - G da| <= safety * delta
    // > 0: also accept once |r - G da| <= l + contraction (|r| - l), l the best linear
    // residual among the candidates; inside the noise bound only this applies.
    // 0 gives the plain noise-level rule.
    double contraction = 0.5;
    double initial_scale = 1e-2;   // alpha_0 = initial_scale * mean(diag(G^T G))
    double ratio = 0.5;            // alpha_k = alpha_0 ratio^k
    int candidates = 60;

    static AlphaStrategy fixed(double alpha);
    static AlphaStrategy discrepancy(double safety = 1.01);
};

struct IterationRecord {
    int iteration = 0;
    double misfit = 0.0;     // |h - K(a_j)|
    double step_norm = 0.0;  // |da_j|
    double alpha = 0.0;
    bool alpha_flag = false;  // no candidate met the discrepancy bound
};

/// Space in which the misfit h - K(a) is measured.
enum class Residual {
    // h - K(a) as is.
    Absolute,
    // log h - log K(a): the multiplicative noise becomes additive with unit
    // scale, and pairs whose signals differ by many orders of magnitude weigh
    // alike. G is scaled row-wise by 1/K(a) accordingly.
    Log,
};

struct InversionConfig {
    double eta = 1e-8;
    Residual residual = Residual::Log;
    // Iterate on log P instead of P: the P column of G is scaled by P and the
    // update becomes P exp(dP), so the concentration can never turn negative.
    bool log_concentration = true;
    int max_iters = 200;
    AlphaStrategy alpha;
    // Relative noise level of the data; delta = noise_level * |h| for absolute
    // residuals and noise_level * sqrt(Q) for log residuals.
    double noise_level = 0.0;
    // Noisy data with the discrepancy strategy: once even the smallest-alpha step
    // would lower |r|^2 by less than significance * delta^2 / Q (chi-square units),
    // take that step (unless it raises the misfit) and stop. Iterating on, weakly
    // determined parameters chase the noise and can run off. 0 disables.
    double significance = 1.0;
    // Central-difference step fd_step * max(|a_s|, fd_scale_floor), at least fd_abs_floor.
    double fd_step = 1e-5;
    double fd_scale_floor = 1.0;
    double fd_abs_floor = 1e-8;
    // Called after every update with the record and the new iterate.
    std::function<void(const IterationRecord&, const ParamVector&)> on_iteration;
};

void validate(const InversionConfig& cfg);

struct InversionState {
    ParamVector a;
    Eigen::VectorXd residual;  // h - K(a)
    Eigen::MatrixXd G;         // Q x S
    Eigen::VectorXd step;
    int iteration = 0;
    std::vector<IterationRecord> history;
};

/// K(a) and the central-difference sensitivity matrix from one batched forward pass.
/// A stencil point that leaves the admissible set falls back to a one-sided difference.
struct Linearization {
    std::vector<double> forward;
    Eigen::MatrixXd G;
};

Linearization linearize(const ParamVector& a, const Acquisition& acquisition, const OpticalParams& p,
                        const QuadratureSpec& q, const InversionConfig& cfg);

Eigen::MatrixXd sensitivity(const ParamVector& a, const Acquisition& acquisition, const OpticalParams& p,
                            const QuadratureSpec& q, const InversionConfig& cfg);

/// Solves (alpha I + G^T G) da = G^T r by LDL^T. Throws FactorizationError.
Eigen::VectorXd lm_step(const Eigen::MatrixXd& G, const Eigen::VectorXd& r, double alpha);

struct AlphaChoice {
    double alpha = 0.0;
    Eigen::VectorXd step;
    double linear_residual = 0.0;
    double best_linear_residual = 0.0;  // at the smallest candidate
    Eigen::VectorXd best_step;          // the smallest candidate's step
    bool flagged = false;
};

/// Largest alpha_0 ratio^k whose linearized residual |r - G da(alpha)| meets the
/// strategy's bound; the smallest candidate with `flagged` set if none does. The
/// contraction term keeps early steps inside the region where the linearization
/// holds, and keeps the iteration moving once the misfit is at the noise level.
AlphaChoice choose_alpha(const Eigen::MatrixXd& G, const Eigen::VectorXd& r, double delta,
                         const AlphaStrategy& strategy);

/// Index of the concentration P in a vector of this layout and length.
std::size_t concentration_index(Layout layout, std::size_t size);

/// Pulls a vector back into the admissible set: ordered bounds separated by at
/// least 1e-3 mm, depth >= 1e-3 mm, P >= 1e-6, positive optical coefficients,
/// time-dependent geometry inside the medium.
ParamVector project(const ParamVector& a);

enum class StopReason { StepNorm, Significance, IterationCap };
std::string_view to_string(StopReason reason);

struct InversionResult {
    ParamVector a;
    bool converged = false;  // stopped by the step norm or the significance test
    StopReason stop = StopReason::IterationCap;
    std::vector<IterationRecord> history;
    std::vector<std::string> warnings;
};

InversionResult invert(const std::vector<double>& h_delta, const ParamVector& a0, const Acquisition& acquisition,
                       const OpticalParams& p, const QuadratureSpec& q, const InversionConfig& cfg);

/// |a_exa - a_rec| / |a_exa|. Throws LayoutError on mismatched vectors.
double err_metric(const ParamVector& exact, const ParamVector& recovered);

struct RunRecord {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string message;
    InversionResult result;
    double err = 0.0;
};

struct MultiRunResult {
    ParamVector average;
    double err = 0.0;
    std::vector<RunRecord> runs;
    std::size_t failures = 0;
};

/// n_runs independent recoveries from h_exact perturbed with seeds base_seed + i.
/// Failed runs are kept in `runs` with their message and left out of the average.
MultiRunResult multi_run(const std::vector<double>& h_exact, const ParamVector& exact, const ParamVector& a0,
                         const Acquisition& acquisition, const OpticalParams& p, const QuadratureSpec& q,
                         InversionConfig cfg, double epsilon, int n_runs, std::uint64_t base_seed);

}  // namespace fdot
