// fdot: forward simulation, localization, inversion and example reproduction.
//
// Exit codes: 0 success, 2 bad input, 3 numerical failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fdot/error.hpp"
#include "fdot/forward.hpp"
#include "fdot/inversion.hpp"
#include "fdot/peaks.hpp"
#include "fdot/report.hpp"
#include "fdot/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fdot;

namespace {

struct Common {
    std::string scenario;
    std::optional<std::string> out;
    double rel_tol = QuadratureSpec{}.rel_tol;
};

struct InvertOpts {
    std::optional<double> eps;
    std::optional<int> runs;
    std::optional<std::uint64_t> seed;
    std::string alpha = "auto";
    double eta = InversionConfig{}.eta;
    int max_iters = InversionConfig{}.max_iters;
    bool verbose = false;
};

struct GridOpts {
    std::optional<double> start, step;
    std::optional<int> count;
};

fs::path output_dir(const Common& c, const std::string& command, const std::string& tag) {
    if (c.out) return *c.out;
    if (const char* env = std::getenv("FDOT_OUT_DIR"); env && *env) return fs::path(env) / (command + "-" + tag);
    return fs::path("fdot_out") / (command + "-" + tag);
}

QuadratureSpec quadrature(const Common& c) {
    QuadratureSpec q;
    q.rel_tol = c.rel_tol;
    validate(q);
    return q;
}

class Session {
public:
    Session(std::string command, const Scenario& s, const Common& c, fs::path dir) : start_(clock::now()) {
        manifest_.command = std::move(command);
        manifest_.scenario = c.scenario.empty() ? s.id : c.scenario;
        manifest_.rel_tol = c.rel_tol;
        manifest_.output_dir = std::move(dir);
        grids_ = grid_summary(s);
        write();
    }
    RunManifest& manifest() { return manifest_; }
    void write() {
        manifest_.extra["time_grids"] = grids_;
        write_manifest(manifest_);
    }
    const fs::path& dir() const { return manifest_.output_dir; }
    void finish() {
        manifest_.wall_clock_s = std::chrono::duration<double>(clock::now() - start_).count();
        manifest_.finished = true;
        write();
        std::cout << "wrote " << dir().string() << '\n';
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
    RunManifest manifest_;
    json grids_;

    static json grid_summary(const Scenario& s) {
        const GridPlan& g = s.grid_plan;
        json out;
        switch (g.mode) {
            case GridPlan::Mode::Uniform:
                out = {{"mode", "uniform"}, {"start_ps", g.start_ps}, {"step_ps", g.step_ps}, {"count", g.count}};
                break;
            case GridPlan::Mode::PeakCentred:
                out = {{"mode", "peak_centred"}, {"before", g.before}, {"after", g.after}, {"step_ps", g.step_ps}};
                break;
            case GridPlan::Mode::Explicit:
                out = {{"mode", "explicit"}};
                break;
        }
        if (g.mode == GridPlan::Mode::PeakCentred && is_time_dependent(s.target))
            out["note"] = "peaks located on the target geometry frozen at u = 0";
        return out;
    }
};

void apply_grid(Scenario& s, const GridOpts& g) {
    if (!g.start && !g.step && !g.count) return;
    s.grid_plan.mode = GridPlan::Mode::Uniform;
    if (g.start) s.grid_plan.start_ps = *g.start;
    if (g.step) s.grid_plan.step_ps = *g.step;
    if (g.count) s.grid_plan.count = *g.count;
    if (!(s.grid_plan.start_ps > 0)) throw ValidationError("--t-start must be positive", "t-start");
    if (!(s.grid_plan.step_ps > 0)) throw ValidationError("--t-step must be positive", "t-step");
    if (s.grid_plan.count < 3) throw ValidationError("--t-count must be at least 3", "t-count");
}

void apply_geometry(Scenario& s, std::optional<double> depth, std::optional<double> side) {
    if (!depth && !side) return;
    if (auto* pt = std::get_if<PointTarget>(&s.target)) {
        if (side) throw ValidationError("--side needs a cuboid target", "side");
        pt->center[2] = *depth;
    } else if (auto* cb = std::get_if<CuboidTarget>(&s.target)) {
        Vec3 c = cb->box.center();
        Vec3 half{0.5 * (cb->box.upper[0] - cb->box.lower[0]), 0.5 * (cb->box.upper[1] - cb->box.lower[1]),
                  0.5 * (cb->box.upper[2] - cb->box.lower[2])};
        if (depth) c[2] = *depth;
        if (side) half = {0.5 * *side, 0.5 * *side, 0.5 * *side};
        for (int i = 0; i < 3; ++i) {
            cb->box.lower[i] = c[i] - half[i];
            cb->box.upper[i] = c[i] + half[i];
        }
    } else {
        throw ValidationError("--depth and --side apply to static targets only", depth ? "depth" : "side");
    }
    validate(s.target);
}

// Reciprocity makes (s, d) and (d, s) the same measurement; evaluating both in
// one canonical order keeps swapped runs identical to the last bit.
SDPair canonical(const SDPair& p) { return p.detector < p.source ? p.swapped() : p; }

json point_json(const BoundaryPoint& p) { return json::array({p.x1, p.x2}); }

// ---- forward ----

int cmd_forward(const Common& c, const GridOpts& g, std::optional<double> depth, std::optional<double> side,
                bool swap) {
    Scenario s = resolve_scenario(c.scenario);
    apply_grid(s, g);
    apply_geometry(s, depth, side);
    if (swap)
        for (auto& p : s.pairs) p = p.swapped();
    validate(s);
    const QuadratureSpec q = quadrature(c);
    Session session("forward", s, c, output_dir(c, "forward", s.id));
    session.manifest().extra = {{"depth_mm", depth ? json(*depth) : json()},
                                {"side_mm", side ? json(*side) : json()},
                                {"swap_sd", swap}};
    session.write();

    Scenario eval = s;
    for (auto& p : eval.pairs) p = canonical(p);
    const Table table = tpsf_table(eval, q);
    write_csv(session.dir() / "tpsf.csv", Table{{"pair", "t_ps", "u_m"}, table.rows});

    json peaks = json::array();
    std::size_t row = 0;
    for (std::size_t k = 0; k < s.pairs.size(); ++k) {
        std::vector<double> t, u;
        while (row < table.rows.size() && table.rows[row][0] == double(k)) {
            t.push_back(table.rows[row][1]);
            u.push_back(table.rows[row][2]);
            ++row;
        }
        const PeakFeatures pk = detect_peak(t, u, s.pairs[k]);
        peaks.push_back({{"pair", k},
                         {"source", point_json(s.pairs[k].source)},
                         {"detector", point_json(s.pairs[k].detector)},
                         {"t_peak_ps", pk.t_peak_ps},
                         {"u_peak", pk.u_peak},
                         {"at_boundary", pk.at_boundary}});
        if (pk.at_boundary) std::cerr << "warning: pair " << k << " peaks at the edge of its time grid\n";
    }
    write_json(session.dir() / "summary.json", {{"scenario", to_json(s)}, {"peaks", peaks}});
    session.finish();
    return 0;
}

// ---- locate ----

int cmd_locate(const Common& c, const GridOpts& g, std::optional<double> depth, int half_count, double pitch,
               double separation, std::vector<double> center) {
    Scenario s = resolve_scenario(c.scenario);
    apply_grid(s, g);
    apply_geometry(s, depth, std::nullopt);
    validate(s);
    if (half_count < 0) throw ValidationError("scan grid is empty (--half-count < 0)", "half-count");
    if (!(pitch > 0)) throw ValidationError("--pitch must be positive", "pitch");
    if (center.size() != 2) throw ValidationError("--center takes two numbers", "center");
    const QuadratureSpec q = quadrature(c);
    const ScanGrid scan = ScanGrid::square({center[0], center[1]}, half_count, pitch, separation);
    scan.validate();
    const GridPlan& plan = s.grid_plan;
    const TimeGrid grid = plan.mode == GridPlan::Mode::Uniform
                              ? TimeGrid::uniform(plan.start_ps, plan.step_ps, std::size_t(plan.count))
                              : TimeGrid::uniform(1.0, 1.0, 600);

    Session session("locate", s, c, output_dir(c, "locate", s.id));
    session.manifest().extra = {{"half_count", half_count},
                                {"pitch_mm", pitch},
                                {"separation_mm", separation},
                                {"center", center}};
    session.write();

    const auto peaks = scan_peaks(scan, s.target, grid, s.optical, q);
    Table heat{{"m1_mm", "m2_mm", "t_peak_ps", "u_peak"}, {}};
    for (std::size_t i = 0; i < peaks.size(); ++i)
        heat.rows.push_back({scan.midpoints[i].x1, scan.midpoints[i].x2, peaks[i].t_peak_ps, peaks[i].u_peak});
    write_csv(session.dir() / "heatmap.csv", heat);

    const Localization loc = localize(scan, peaks, s.optical);
    for (const auto& w : loc.warnings) std::cerr << "warning: " << w << '\n';
    write_json(session.dir() / "locate.json",
               {{"x_c1", loc.center[0]},
                {"x_c2", loc.center[1]},
                {"x_c3", loc.center[2]},
                {"P", loc.concentration},
                {"refined_center", loc.refined_center},
                {"t_peak_ps", loc.winner.t_peak_ps},
                {"u_peak", loc.winner.u_peak},
                {"asymmetry", loc.asymmetry},
                {"warnings", loc.warnings}});
    session.finish();
    return 0;
}

// ---- invert ----

InversionConfig inversion_config(const InvertOpts& o) {
    InversionConfig cfg;
    cfg.eta = o.eta;
    cfg.max_iters = o.max_iters;
    if (o.alpha == "auto") {
        cfg.alpha = AlphaStrategy::discrepancy();
    } else {
        double a = 0;
        std::istringstream in(o.alpha);
        if (!(in >> a) || !in.eof() || !(a > 0))
            throw ValidationError("--alpha must be 'auto' or a positive number", "alpha");
        cfg.alpha = AlphaStrategy::fixed(a);
    }
    if (o.verbose)
        cfg.on_iteration = [](const IterationRecord& r, const ParamVector&) {
            std::cerr << "  iter " << r.iteration << " misfit " << r.misfit << " step " << r.step_norm << " alpha "
                      << r.alpha << (r.alpha_flag ? " (flagged)" : "") << '\n';
        };
    validate(cfg);
    return cfg;
}

std::string eps_tag(double eps) {
    std::ostringstream s;
    s << "eps" << eps;
    return s.str();
}

struct InversionSetup {
    Acquisition acq;
    std::vector<double> h_exact;
    ParamVector a0;
};

InversionSetup prepare(const Scenario& s, const QuadratureSpec& q) {
    if (!s.initial_guess) throw ValidationError("scenario '" + s.id + "' has no initial guess", "initial_guess");
    InversionSetup out{acquisition(s, q), {}, *s.initial_guess};
    out.h_exact = measure(s.exact(), out.acq, s.optical, q).data;
    return out;
}

// Runs one noise level and writes its files under `dir` with `tag` in the names.
json run_level(const Scenario& s, const InversionSetup& setup, const QuadratureSpec& q, const InversionConfig& cfg,
               double eps, int runs, std::uint64_t seed, const fs::path& dir, const std::string& tag) {
    std::cerr << s.id << ": " << runs << " run(s) at epsilon " << eps << '\n';
    const MultiRunResult r = multi_run(setup.h_exact, s.exact(), setup.a0, setup.acq, s.optical, q, cfg, eps, runs, seed);
    write_csv(dir / ("runs_" + tag + ".csv"), runs_table(r));
    for (const auto& run : r.runs) {
        if (run.failed) {
            std::cerr << "  seed " << run.seed << " failed: " << run.message << '\n';
            continue;
        }
        write_csv(dir / ("history_" + tag + "_seed" + std::to_string(run.seed) + ".csv"), history_table(run.result));
        for (const auto& w : run.result.warnings) std::cerr << "  seed " << run.seed << ": " << w << '\n';
    }
    json report = inversion_report(s, setup.a0, eps, seed, r);
    write_json(dir / ("report_" + tag + ".json"), report);
    std::cerr << "  Err " << r.err << " (" << r.failures << " failed)\n";
    return report;
}

int cmd_invert(const Common& c, const InvertOpts& o) {
    Scenario s = resolve_scenario(c.scenario);
    validate(s);
    const QuadratureSpec q = quadrature(c);
    const InversionConfig cfg = inversion_config(o);
    const double eps = o.eps.value_or(s.noise.epsilon);
    const int runs = o.runs.value_or(eps == 0.0 ? 1 : s.runs);
    const std::uint64_t seed = o.seed.value_or(s.noise.seed);
    if (runs < 1) throw ValidationError("--runs must be at least 1", "runs");
    validate(NoiseSpec{eps, seed});

    Session session("invert", s, c, output_dir(c, "invert", s.id));
    for (int i = 0; i < runs; ++i) session.manifest().seeds.push_back(seed + std::uint64_t(i));
    session.manifest().eta = cfg.eta;
    session.manifest().alpha = o.alpha;
    session.manifest().extra = {{"epsilon", eps}, {"runs", runs}, {"max_iters", cfg.max_iters}};
    session.write();

    const InversionSetup setup = prepare(s, q);
    const json report = run_level(s, setup, q, cfg, eps, runs, seed, session.dir(), eps_tag(eps));
    session.finish();
    return report["failures"].get<std::size_t>() == std::size_t(runs) ? 3 : 0;
}

// ---- reproduce ----

// Exact and recovered boxes along normalized time, with their Hausdorff distance.
Table trajectory_table(const ParamVector& exact, const ParamVector& recovered, int samples) {
    Table t{{"u", "hausdorff_mm"}, {}};
    for (const char* who : {"exact", "recovered"})
        for (const char* side : {"lower", "upper"})
            for (int i = 1; i <= 3; ++i)
                t.columns.push_back(std::string(who) + "_" + side + "_x" + std::to_string(i) + "_mm");
    for (int k = 0; k < samples; ++k) {
        const double u = double(k) / (samples - 1);
        const Box a = box_of(exact, u), b = box_of(recovered, u);
        std::vector<double> row{u, hausdorff(a, b)};
        for (const Box* box : {&a, &b}) {
            row.insert(row.end(), box->lower.begin(), box->lower.end());
            row.insert(row.end(), box->upper.begin(), box->upper.end());
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

int cmd_reproduce(const std::string& id, const Common& common, const InvertOpts& o) {
    Common c = common;
    c.scenario = id;
    Scenario s = builtin(id);
    const QuadratureSpec q = quadrature(c);
    Session session("reproduce", s, c, output_dir(c, "reproduce", id));

    if (id == "ex1") {
        session.write();
        write_csv(session.dir() / "figure1_tpsf.csv", tpsf_table(s, q));
        write_csv(session.dir() / "figure2_depth_sweep.csv", depth_sweep_table(s, q));
    } else if (id == "ex2") {
        session.write();
        write_csv(session.dir() / "figure3_side_sweep.csv", side_sweep_table(s, q));
    } else {
        const InversionConfig cfg = inversion_config(o);
        std::vector<double> levels;
        if (o.eps) levels = {*o.eps};
        else if (id == "ex3a") levels = {0.01, 0.05};
        else levels = {s.noise.epsilon};
        const std::uint64_t seed = o.seed.value_or(s.noise.seed);
        const int runs = o.runs.value_or(s.runs);
        if (runs < 1) throw ValidationError("--runs must be at least 1", "runs");
        for (double eps : levels) validate(NoiseSpec{eps, seed});
        for (int i = 0; i < runs; ++i) session.manifest().seeds.push_back(seed + std::uint64_t(i));
        session.manifest().eta = cfg.eta;
        session.manifest().alpha = o.alpha;
        session.manifest().extra = {{"epsilon", levels}, {"runs", runs}, {"max_iters", cfg.max_iters}};
        session.write();

        const InversionSetup setup = prepare(s, q);
        write_csv(session.dir() / "tpsf.csv", tpsf_table(s, q));
        json table = {{"scenario", id}, {"columns", json::array()}, {"err", json::array()}};
        const auto names = parameter_names(s.exact());
        json rows = json::array();
        for (std::size_t i = 0; i < names.size(); ++i)
            rows.push_back({{"parameter", names[i]}, {"exact", s.exact().values[i]}, {"initial", setup.a0.values[i]}});
        for (double eps : levels) {
            const std::string tag = eps_tag(eps);
            const json report = run_level(s, setup, q, cfg, eps, runs, seed, session.dir(), tag);
            table["columns"].push_back(eps);
            table["err"].push_back(report["err"]);
            for (std::size_t i = 0; i < names.size(); ++i)
                rows[i]["recovered_" + tag] = report["table"][i]["recovered"];
            if (is_time_dependent(s.target)) {
                ParamVector avg{s.layout, {}};
                for (const auto& r : report["table"]) avg.values.push_back(r["recovered"].get<double>());
                write_csv(session.dir() / ("trajectory_" + tag + ".csv"), trajectory_table(s.exact(), avg, 11));
            }
        }
        table["rows"] = rows;
        const char* name = id == "ex3a" ? "table1.json" : id == "ex3b" ? "table2.json" : "summary.json";
        write_json(session.dir() / name, table);
    }
    session.finish();
    return 0;
}

std::string joined_ids() {
    std::string all;
    for (const auto& id : builtin_ids()) all += (all.empty() ? "" : ", ") + id;
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-domain fluorescence tomography in a half-space"};
    app.require_subcommand(1);

    Common common;
    InvertOpts inv;
    GridOpts grid;
    std::optional<double> depth, side;
    bool swap = false;
    int half_count = 4;
    double pitch = 1.0, separation = 6.0;
    std::vector<double> center{0.0, 0.0};
    std::string reproduce_id;

    auto add_common = [&](CLI::App* sub, bool needs_scenario) {
        auto* opt = sub->add_option("--scenario", common.scenario, "builtin id (" + joined_ids() + ") or JSON file");
        if (needs_scenario) opt->required();
        sub->add_option("--out", common.out, "output directory (default $FDOT_OUT_DIR/<command>-<id> or fdot_out/...)");
        sub->add_option("--rel-tol", common.rel_tol, "relative quadrature tolerance");
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--t-start", grid.start, "first sample time, ps (switches to a uniform grid)");
        sub->add_option("--t-step", grid.step, "sample spacing, ps");
        sub->add_option("--t-count", grid.count, "number of samples");
    };
    auto add_invert = [&](CLI::App* sub) {
        sub->add_option("--eps", inv.eps, "relative noise level (default: scenario)");
        sub->add_option("--runs", inv.runs, "number of noisy runs (default: scenario)");
        sub->add_option("--seed", inv.seed, "seed of the first run; run i uses seed + i");
        sub->add_option("--alpha", inv.alpha, "'auto' or a fixed regularization parameter");
        sub->add_option("--eta", inv.eta, "stop once the update norm falls below this");
        sub->add_option("--max-iters", inv.max_iters, "iteration cap");
        sub->add_flag("--verbose", inv.verbose, "print every iteration");
    };

    auto* fwd = app.add_subcommand("forward", "TPSF of every pair of a scenario");
    add_common(fwd, true);
    add_grid(fwd);
    fwd->add_option("--depth", depth, "move the target centre to this depth, mm");
    fwd->add_option("--side", side, "cuboid side, mm");
    fwd->add_flag("--swap-sd", swap, "exchange sources and detectors");

    auto* loc = app.add_subcommand("locate", "peak-based localization from a fixed-separation scan");
    add_common(loc, true);
    add_grid(loc);
    loc->add_option("--depth", depth, "move the target centre to this depth, mm");
    loc->add_option("--half-count", half_count, "scan has (2n+1)^2 midpoints");
    loc->add_option("--pitch", pitch, "midpoint spacing, mm");
    loc->add_option("--separation", separation, "source-detector distance, mm");
    loc->add_option("--center", center, "scan centre x1 x2, mm")->expected(2);

    auto* invc = app.add_subcommand("invert", "regularized recovery from noisy synthetic data");
    add_common(invc, true);
    add_invert(invc);

    auto* rep = app.add_subcommand("reproduce", "regenerate the tables and curves of one example");
    rep->add_option("id", reproduce_id, "example id")->required();
    rep->add_option("--out", common.out, "output directory");
    rep->add_option("--rel-tol", common.rel_tol, "relative quadrature tolerance");
    add_invert(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fwd) return cmd_forward(common, grid, depth, side, swap);
        if (*loc) return cmd_locate(common, grid, depth, half_count, pitch, separation, center);
        if (*invc) return cmd_invert(common, inv);
        if (*rep) return cmd_reproduce(reproduce_id, common, inv);
    } catch (const ValidationError& e) {
        std::cerr << "error";
        if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
        std::cerr << ": " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
