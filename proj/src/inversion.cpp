#include "fdot/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fdot/error.hpp"

namespace fdot {

namespace {

constexpr double kMinSeparation = 1e-3;
constexpr double kMinDepth = 1e-3;
constexpr double kMinConcentration = 1e-6;
constexpr double kMinCoefficient = 1e-6;
constexpr int kProjectionSamples = 64;

Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
    return {v.data(), Eigen::Index(v.size())};
}

bool admissible(const ParamVector& v) {
    try {
        (void)decode(v);
        return true;
    } catch (const ValidationError&) {
        return false;
    }
}

void order_bounds(double& lo, double& hi) {
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < kMinSeparation) {
        const double mid = 0.5 * (lo + hi);
        lo = mid - 0.5 * kMinSeparation;
        hi = mid + 0.5 * kMinSeparation;
    }
}

void project_box(double* bounds) {
    for (int axis = 0; axis < 3; ++axis) order_bounds(bounds[2 * axis], bounds[2 * axis + 1]);
    if (bounds[4] < kMinDepth) {
        bounds[4] = kMinDepth;
        bounds[5] = std::max(bounds[5], kMinDepth + kMinSeparation);
    }
}

double poly(const double* c, std::size_t n, double u) {
    double acc = 0.0;
    for (std::size_t k = n; k-- > 0;) acc = acc * u + c[k];
    return acc;
}

template <class F>
double min_on_unit(F&& f) {
    double m = f(0.0);
    for (int i = 1; i <= kProjectionSamples; ++i) m = std::min(m, f(double(i) / kProjectionSamples));
    return m;
}

}  // namespace

void validate(const NoiseSpec& noise) {
    if (!(noise.epsilon >= 0) || !std::isfinite(noise.epsilon))
        throw ValidationError("noise level must be a finite non-negative number", "eps");
}

std::vector<double> add_noise(const std::vector<double>& h, const NoiseSpec& noise) {
    validate(noise);
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> zeta(0.0, 1.0);
    std::vector<double> out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] * (1.0 + zeta(rng) * noise.epsilon);
    return out;
}

Measurement add_noise(const Measurement& h, const NoiseSpec& noise) {
    return Measurement{h.acquisition, add_noise(h.data, noise)};
}

AlphaStrategy AlphaStrategy::fixed(double alpha) {
    AlphaStrategy s;
    s.kind = Kind::Fixed;
    s.alpha = alpha;
    return s;
}

AlphaStrategy AlphaStrategy::discrepancy(double safety) {
    AlphaStrategy s;
    s.kind = Kind::Discrepancy;
    s.safety = safety;
    return s;
}

void validate(const InversionConfig& cfg) {
    if (!(cfg.eta > 0)) throw ValidationError("eta must be positive", "eta");
    if (cfg.max_iters < 1) throw ValidationError("max_iters must be at least 1", "max_iters");
    if (!(cfg.fd_step > 0)) throw ValidationError("finite-difference step must be positive", "fd_step");
    if (!(cfg.noise_level >= 0)) throw ValidationError("noise level must be non-negative", "eps");
    if (!(cfg.significance >= 0)) throw ValidationError("significance must be non-negative", "significance");
    const AlphaStrategy& a = cfg.alpha;
    if (a.kind == AlphaStrategy::Kind::Fixed && !(a.alpha > 0))
        throw ValidationError("fixed alpha must be positive", "alpha");
    if (a.kind == AlphaStrategy::Kind::Discrepancy &&
        (!(a.safety > 0) || !(a.contraction >= 0 && a.contraction < 1) || !(a.initial_scale > 0) || !(a.ratio > 0 && a.ratio < 1) || a.candidates < 1))
        throw ValidationError("invalid discrepancy search settings", "alpha");
}

Linearization linearize(const ParamVector& a, const Acquisition& acquisition, const OpticalParams& p,
                        const QuadratureSpec& q, const InversionConfig& cfg) {
    check_length(a);
    const std::size_t S = a.size();
    std::vector<ParamVector> stencil{a};
    std::vector<double> steps(S);
    // Position of (plus, minus) in `stencil`, or 0 when that side is not admissible.
    std::vector<std::pair<std::size_t, std::size_t>> slots(S);
    for (std::size_t s = 0; s < S; ++s) {
        const double h = std::max(cfg.fd_step * std::max(std::abs(a.values[s]), cfg.fd_scale_floor), cfg.fd_abs_floor);
        steps[s] = h;
        ParamVector plus = a, minus = a;
        plus.values[s] += h;
        minus.values[s] -= h;
        if (admissible(plus)) {
            slots[s].first = stencil.size();
            stencil.push_back(std::move(plus));
        }
        if (admissible(minus)) {
            slots[s].second = stencil.size();
            stencil.push_back(std::move(minus));
        }
        if (slots[s].first == 0 && slots[s].second == 0)
            throw SensitivityError("no admissible finite-difference neighbour for parameter " + std::to_string(s), s);
    }

    std::vector<std::vector<double>> k;
    try {
        k = measure_batch(stencil, acquisition, p, q);
    } catch (const Error&) {
        // Find the parameter whose perturbation broke the forward model.
        (void)measure(a, acquisition, p, q);
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t slot : {slots[s].first, slots[s].second}) {
                if (slot == 0) continue;
                try {
                    (void)measure(stencil[slot], acquisition, p, q);
                } catch (const Error& inner) {
                    throw SensitivityError("forward model failed while perturbing parameter " + std::to_string(s) +
                                               ": " + inner.what(),
                                           s);
                }
            }
        }
        throw;
    }

    Linearization out;
    out.forward = std::move(k[0]);
    const Eigen::Index Q = Eigen::Index(out.forward.size());
    out.G.resize(Q, Eigen::Index(S));
    const auto base = as_vector(out.forward);
    for (std::size_t s = 0; s < S; ++s) {
        const auto [ip, im] = slots[s];
        if (ip && im) {
            out.G.col(Eigen::Index(s)) = (as_vector(k[ip]) - as_vector(k[im])) / (2.0 * steps[s]);
        } else if (ip) {
            out.G.col(Eigen::Index(s)) = (as_vector(k[ip]) - base) / steps[s];
        } else {
            out.G.col(Eigen::Index(s)) = (base - as_vector(k[im])) / steps[s];
        }
    }
    return out;
}

Eigen::MatrixXd sensitivity(const ParamVector& a, const Acquisition& acquisition, const OpticalParams& p,
                            const QuadratureSpec& q, const InversionConfig& cfg) {
    return linearize(a, acquisition, p, q, cfg).G;
}

Eigen::VectorXd lm_step(const Eigen::MatrixXd& G, const Eigen::VectorXd& r, double alpha) {
    if (G.rows() != r.size()) throw ValidationError("sensitivity rows and residual length differ", "G");
    if (!(alpha > 0)) throw ValidationError("alpha must be positive", "alpha");
    Eigen::MatrixXd normal = G.transpose() * G;
    normal.diagonal().array() += alpha;
    const Eigen::VectorXd rhs = G.transpose() * r;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw FactorizationError("normal equations are not positive definite");
    Eigen::VectorXd step = ldlt.solve(rhs);
    if (!step.allFinite()) throw FactorizationError("normal-equation solve produced non-finite values");
    return step;
}

AlphaChoice choose_alpha(const Eigen::MatrixXd& G, const Eigen::VectorXd& r, double delta,
                         const AlphaStrategy& strategy) {
    if (!(delta >= 0)) throw ValidationError("noise bound must be non-negative", "delta");
    const double mean_diag = (G.transpose() * G).diagonal().mean();
    const double alpha0 = strategy.initial_scale * (mean_diag > 0 ? mean_diag : 1.0);
    const double alpha_min = alpha0 * std::pow(strategy.ratio, strategy.candidates - 1);
    Eigen::VectorXd best_step = lm_step(G, r, alpha_min);
    const double best = (r - G * best_step).norm();
    double target = strategy.safety * delta;
    if (strategy.contraction > 0) {
        // fraction of the best linear decrease on offer; once the residual is
        // inside the noise bound that alone decides, else alpha0 always passes
        // and the iterates crawl
        const double rn = r.norm();
        const double floor = best + strategy.contraction * (rn - best);
        target = rn > target ? std::max(target, floor) : floor;
    }
    AlphaChoice choice;
    choice.best_linear_residual = best;
    choice.best_step = std::move(best_step);
    double alpha = alpha0;
    for (int k = 0; k < strategy.candidates; ++k, alpha *= strategy.ratio) {
        choice.alpha = alpha;
        choice.step = lm_step(G, r, alpha);
        choice.linear_residual = (r - G * choice.step).norm();
        if (choice.linear_residual <= target) return choice;
    }
    choice.flagged = true;
    return choice;
}

std::size_t concentration_index(Layout layout, std::size_t size) {
    switch (layout) {
        case Layout::Point4:
        case Layout::GrowingCuboid: return 3;
        case Layout::Cuboid7: return 6;
        case Layout::Joint9: return 8;
        case Layout::MovingCuboid: return size - 1;
    }
    throw LayoutError("unknown layout", "layout");
}

ParamVector project(const ParamVector& a) {
    check_length(a);
    ParamVector out = a;
    double* v = out.values.data();
    const std::size_t n = out.size();
    switch (out.layout) {
        case Layout::Point4:
            v[2] = std::max(v[2], kMinDepth);
            v[3] = std::max(v[3], kMinConcentration);
            break;
        case Layout::Cuboid7:
            project_box(v);
            v[6] = std::max(v[6], kMinConcentration);
            break;
        case Layout::Joint9:
            v[0] = std::max(v[0], kMinCoefficient);
            v[1] = std::max(v[1], kMinCoefficient);
            project_box(v + 2);
            v[8] = std::max(v[8], kMinConcentration);
            break;
        case Layout::GrowingCuboid: {
            v[3] = std::max(v[3], kMinConcentration);
            const double* side = v + 4;
            const std::size_t m = n - 4;
            const double smallest = min_on_unit([&](double u) { return poly(side, m, u); });
            if (smallest < kMinSeparation) v[4] += kMinSeparation - smallest;
            const double clearance = min_on_unit([&](double u) { return v[2] - 0.5 * poly(side, m, u); });
            if (clearance < kMinDepth) v[2] += kMinDepth - clearance;
            break;
        }
        case Layout::MovingCuboid: {
            const std::size_t m = (n - 2) / 3;
            double& side = v[n - 2];
            v[n - 1] = std::max(v[n - 1], kMinConcentration);
            side = std::max(side, kMinSeparation);
            double* c3 = v + 2 * m;
            const double clearance = min_on_unit([&](double u) { return poly(c3, m, u) - 0.5 * side; });
            if (clearance < kMinDepth) c3[0] += kMinDepth - clearance;
            break;
        }
    }
    return out;
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
        case StopReason::StepNorm: return "step_norm";
        case StopReason::Significance: return "significance";
        case StopReason::IterationCap: return "iteration_cap";
    }
    return "iteration_cap";
}

InversionResult invert(const std::vector<double>& h_delta, const ParamVector& a0, const Acquisition& acquisition,
                       const OpticalParams& p, const QuadratureSpec& q, const InversionConfig& cfg) {
    validate(cfg);
    if (h_delta.size() != acquisition.total_samples())
        throw ValidationError("data length does not match the acquisition", "data");
    (void)decode(a0);

    const bool log_space = cfg.residual == Residual::Log;
    Eigen::VectorXd h = as_vector(h_delta);
    if (log_space) {
        if (!(h.minCoeff() > 0))
            throw ValidationError("log residuals need strictly positive data", "data");
        h = h.array().log();
    }
    const double delta = cfg.noise_level * (log_space ? std::sqrt(double(h.size())) : as_vector(h_delta).norm());
    InversionResult result;
    ParamVector a = project(a0);
    double previous_misfit = INFINITY;
    const bool noise_stop = delta > 0 && cfg.significance > 0 && cfg.alpha.kind != AlphaStrategy::Kind::Fixed;
    auto misfit_at = [&](const ParamVector& x) {
        Eigen::VectorXd kx = as_vector(measure(x, acquisition, p, q).data);
        if (log_space) kx = kx.array().log();
        return (h - kx).norm();
    };

    for (int j = 0; j < cfg.max_iters; ++j) {
        Linearization lin;
        try {
            lin = linearize(a, acquisition, p, q, cfg);
        } catch (const SensitivityError& e) {
            throw SensitivityError("iteration " + std::to_string(j) + ": " + e.what(), e.index());
        } catch (const QuadratureError& e) {
            throw QuadratureError("iteration " + std::to_string(j) + ": " + e.what(), e.error_estimate(), e.value());
        }
        Eigen::VectorXd k = as_vector(lin.forward);
        if (log_space) {
            if (!(k.minCoeff() > 0))
                throw NumericalError("iteration " + std::to_string(j) + ": forward signal underflowed to zero");
            lin.G = k.cwiseInverse().asDiagonal() * lin.G;
            k = k.array().log();
        }
        const Eigen::VectorXd r = h - k;
        const std::size_t ip = concentration_index(a.layout, a.size());
        if (cfg.log_concentration) lin.G.col(Eigen::Index(ip)) *= a.values[ip];

        IterationRecord rec;
        rec.iteration = j;
        rec.misfit = r.norm();
        const double unit = cfg.significance * delta * delta / double(r.size());
        Eigen::VectorXd step;
        if (cfg.alpha.kind == AlphaStrategy::Kind::Fixed) {
            rec.alpha = cfg.alpha.alpha;
            step = lm_step(lin.G, r, rec.alpha);
        } else {
            AlphaChoice choice = choose_alpha(lin.G, r, delta, cfg.alpha);
            rec.alpha = choice.alpha;
            rec.alpha_flag = choice.flagged;
            step = std::move(choice.step);
            const double gain = rec.misfit * rec.misfit - choice.best_linear_residual * choice.best_linear_residual;
            if (noise_stop && gain <= unit) {
                // the rest is noise: finish on the linearized minimizer, which is
                // within one sigma by construction, instead of creeping toward it
                step = std::move(choice.best_step);
                result.stop = StopReason::Significance;
            }
        }
        rec.step_norm = step.norm();
        result.history.push_back(rec);

        if (j >= 3 && rec.misfit > previous_misfit) {
            std::ostringstream msg;
            msg << "misfit increased at iteration " << j << " (" << previous_misfit << " -> " << rec.misfit << ")";
            result.warnings.push_back(msg.str());
        }
        previous_misfit = rec.misfit;

        const ParamVector previous = a;
        ParamVector next = a;
        for (std::size_t s = 0; s < next.size(); ++s) {
            const double d = step[Eigen::Index(s)];
            next.values[s] = cfg.log_concentration && s == ip ? next.values[s] * std::exp(d) : next.values[s] + d;
        }
        a = project(next);
        if (result.stop == StopReason::Significance) {
            // no further linearization to catch a bad final step, so check it here
            const double after = misfit_at(a);
            if (!(after <= rec.misfit)) {
                std::ostringstream msg;
                msg << "final step " << j << " dropped: misfit " << rec.misfit << " -> " << after;
                result.warnings.push_back(msg.str());
                a = previous;
            }
            if (cfg.on_iteration) cfg.on_iteration(rec, a);
            result.converged = true;
            break;
        }
        if (cfg.on_iteration) cfg.on_iteration(rec, a);
        if (rec.step_norm <= cfg.eta) {
            result.converged = true;
            result.stop = StopReason::StepNorm;
            break;
        }
    }
    result.a = a;
    return result;
}

double err_metric(const ParamVector& exact, const ParamVector& recovered) {
    if (exact.layout != recovered.layout || exact.size() != recovered.size())
        throw LayoutError("cannot compare parameter vectors of different layouts", "layout");
    const auto e = as_vector(exact.values);
    const auto r = as_vector(recovered.values);
    const double norm = e.norm();
    if (!(norm > 0)) throw ValidationError("exact parameter vector is zero", "exact");
    return (e - r).norm() / norm;
}

MultiRunResult multi_run(const std::vector<double>& h_exact, const ParamVector& exact, const ParamVector& a0,
                         const Acquisition& acquisition, const OpticalParams& p, const QuadratureSpec& q,
                         InversionConfig cfg, double epsilon, int n_runs, std::uint64_t base_seed) {
    if (n_runs < 1) throw ValidationError("need at least one run", "runs");
    validate(NoiseSpec{epsilon, base_seed});
    cfg.noise_level = epsilon;

    MultiRunResult out;
    out.average = ParamVector{exact.layout, std::vector<double>(exact.size(), 0.0)};
    for (int i = 0; i < n_runs; ++i) {
        RunRecord run;
        run.seed = base_seed + std::uint64_t(i);
        try {
            const auto noisy = add_noise(h_exact, NoiseSpec{epsilon, run.seed});
            run.result = invert(noisy, a0, acquisition, p, q, cfg);
            run.err = err_metric(exact, run.result.a);
            for (std::size_t s = 0; s < exact.size(); ++s) out.average.values[s] += run.result.a.values[s];
        } catch (const Error& e) {
            run.failed = true;
            run.message = e.what();
            ++out.failures;
        }
        out.runs.push_back(std::move(run));
    }
    const std::size_t good = out.runs.size() - out.failures;
    if (good == 0) throw NumericalError("every recovery run failed; first error: " + out.runs.front().message);
    for (double& x : out.average.values) x /= double(good);
    out.err = err_metric(exact, out.average);
    return out;
}

}  // namespace fdot
