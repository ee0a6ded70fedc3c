#include "fdot/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fdot/error.hpp"
#include "fdot/peaks.hpp"

namespace fdot {

using nlohmann::json;

namespace {

// Sources S1..S4 and detectors D1..D8 of the four-source ring setup; all 32 pairs, source-major.
std::vector<SDPair> ring_pairs() {
    const std::vector<BoundaryPoint> sources{{-13, -13}, {9, -13}, {9, 9}, {-13, 9}};
    const std::vector<BoundaryPoint> detectors{{-13, -6}, {-6, -18}, {2, -18}, {9, -6},
                                               {9, 2},    {2, 14},   {-6, 14}, {-13, 2}};
    std::vector<SDPair> pairs;
    for (const auto& s : sources)
        for (const auto& d : detectors) pairs.push_back(make_pair(s, d));
    return pairs;
}

GridPlan peak_centred_plan() {
    GridPlan plan;
    plan.mode = GridPlan::Mode::PeakCentred;
    plan.step_ps = 2.0;
    plan.before = 10;
    plan.after = 9;
    return plan;
}

OpticalParams deep_tissue() { return OpticalParams::tissue_defaults().with_absorption(2.0); }

Scenario ex1() {
    Scenario s;
    s.id = "ex1";
    s.description = "point target under a 6 mm source-detector pair; depth sweep of exact vs closed-form peaks";
    s.target = PointTarget{{0, 0, 5}, 1e6};
    s.layout = Layout::Point4;
    s.pairs = {make_pair({-3, 0}, {3, 0})};
    s.grid_plan.start_ps = 1.0;
    s.grid_plan.step_ps = 1.0;
    s.grid_plan.count = 600;
    std::vector<double> depths{0.05};
    for (int k = 1; k <= 60; ++k) depths.push_back(k / 10.0);
    s.sweep = Sweep{"depth", depths};
    return s;
}

Scenario ex2() {
    Scenario s = ex1();
    s.id = "ex2";
    s.description = "cubic target centred at (0,0,5); side sweep of exact cube peaks vs the point target";
    s.target = CuboidTarget{cube({0, 0, 5}, 1.0), 1e6};
    s.layout = Layout::Cuboid7;
    std::vector<double> sides{0.01};
    for (int k = 1; k <= 20; ++k) sides.push_back(k / 20.0);
    s.sweep = Sweep{"side", sides};
    return s;
}

Scenario ex3a() {
    Scenario s;
    s.id = "ex3a";
    s.description = "cuboid target, known medium; 4 sources x 8 detectors, 20 peak-centred samples per pair";
    s.optical = deep_tissue();
    s.target = CuboidTarget{Box{{-1, -1, 9}, {1, 1, 11}}, 0.5};
    s.layout = Layout::Cuboid7;
    s.pairs = ring_pairs();
    s.grid_plan = peak_centred_plan();
    s.noise = NoiseSpec{0.01, 1};
    s.runs = 10;
    s.initial_guess = ParamVector{Layout::Cuboid7, {-5.1, -4.9, -2.1, -1.9, 5.9, 6.1, 0.1}};
    return s;
}

Scenario ex3b() {
    Scenario s = ex3a();
    s.id = "ex3b";
    s.description = "cuboid target with unknown scattering and absorption; same acquisition as ex3a";
    s.layout = Layout::Joint9;
    s.initial_guess = ParamVector{Layout::Joint9, {5, 0.5, -5.1, -4.9, -2.1, -1.9, 5.9, 6.1, 0.1}};
    return s;
}

Scenario ex4a() {
    Scenario s = ex3a();
    s.id = "ex4a";
    s.description = "cube with fixed centre (0,0,10) and side 1/2 + u over the gate window";
    s.target = GrowingCuboidTarget{{0, 0, 10}, Polynomial{{0.5, 1.0}}, 0.5};
    s.layout = Layout::GrowingCuboid;
    s.initial_guess = ParamVector{Layout::GrowingCuboid, {-2, -2, 5, 0.2, 0.1, 0.2}};
    return s;
}

Scenario ex4b() {
    Scenario s = ex3a();
    s.id = "ex4b";
    s.description = "cube of side 2 whose centre moves as (-4 + 6u, -5 + 8u, 8) over the gate window";
    s.target = MovingCuboidTarget{{Polynomial{{-4, 6}}, Polynomial{{-5, 8}}, Polynomial{{8, 0}}}, 2.0, 0.5};
    s.layout = Layout::MovingCuboid;
    s.initial_guess = ParamVector{Layout::MovingCuboid, {-1, 2, -2, 3, 4, 0, 0.2, 0.1}};
    return s;
}

// ---- JSON helpers ----

template <class T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'", key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("field '") + key + "': " + e.what(), key);
    }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? field<T>(j, key) : fallback;
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j, const char* key) {
    const auto v = field<std::vector<double>>(j, key);
    if (v.size() != 3) throw ValidationError(std::string("field '") + key + "' needs 3 entries", key);
    return {v[0], v[1], v[2]};
}

BoundaryPoint point_from(const json& j, const char* key) {
    const auto v = field<std::vector<double>>(j, key);
    if (v.size() != 2) throw ValidationError(std::string("field '") + key + "' needs 2 entries", key);
    return {v[0], v[1]};
}

json target_json(const Target& t) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PointTarget>) {
                return {{"kind", "point"}, {"center", vec_json(x.center)}, {"concentration", x.concentration}};
            } else if constexpr (std::is_same_v<T, CuboidTarget>) {
                return {{"kind", "cuboid"},
                        {"lower", vec_json(x.box.lower)},
                        {"upper", vec_json(x.box.upper)},
                        {"concentration", x.concentration}};
            } else if constexpr (std::is_same_v<T, MovingCuboidTarget>) {
                return {{"kind", "moving_cuboid"},
                        {"center", json::array({x.center[0].coeffs, x.center[1].coeffs, x.center[2].coeffs})},
                        {"side", x.side},
                        {"concentration", x.concentration}};
            } else {
                return {{"kind", "growing_cuboid"},
                        {"center", vec_json(x.center)},
                        {"side", x.side.coeffs},
                        {"concentration", x.concentration}};
            }
        },
        t);
}

Target target_from(const json& j) {
    const auto kind = field<std::string>(j, "kind");
    const auto P = field<double>(j, "concentration");
    if (kind == "point") return PointTarget{vec_from(j, "center"), P};
    if (kind == "cuboid") return CuboidTarget{Box{vec_from(j, "lower"), vec_from(j, "upper")}, P};
    if (kind == "growing_cuboid")
        return GrowingCuboidTarget{vec_from(j, "center"), Polynomial{field<std::vector<double>>(j, "side")}, P};
    if (kind == "moving_cuboid") {
        const auto c = field<std::vector<std::vector<double>>>(j, "center");
        if (c.size() != 3) throw ValidationError("moving cuboid needs 3 centre polynomials", "center");
        return MovingCuboidTarget{{Polynomial{c[0]}, Polynomial{c[1]}, Polynomial{c[2]}}, field<double>(j, "side"), P};
    }
    throw ValidationError("unknown target kind '" + kind + "'", "target.kind");
}

std::string_view mode_name(GridPlan::Mode m) {
    switch (m) {
        case GridPlan::Mode::Uniform: return "uniform";
        case GridPlan::Mode::PeakCentred: return "peak_centred";
        case GridPlan::Mode::Explicit: return "explicit";
    }
    return "uniform";
}

json plan_json(const GridPlan& p) {
    json j{{"mode", mode_name(p.mode)}};
    switch (p.mode) {
        case GridPlan::Mode::Uniform:
            j["start_ps"] = p.start_ps;
            j["step_ps"] = p.step_ps;
            j["count"] = p.count;
            break;
        case GridPlan::Mode::PeakCentred:
            j["step_ps"] = p.step_ps;
            j["before"] = p.before;
            j["after"] = p.after;
            j["search_ps"] = {p.search_start_ps, p.search_end_ps};
            j["search_pitch_ps"] = p.search_pitch_ps;
            break;
        case GridPlan::Mode::Explicit: {
            json grids = json::array();
            for (const auto& g : p.grids) grids.push_back(g.times_ps);
            j["times_ps"] = grids;
            break;
        }
    }
    return j;
}

GridPlan plan_from(const json& j) {
    GridPlan p;
    const auto mode = field<std::string>(j, "mode");
    if (mode == "uniform") {
        p.mode = GridPlan::Mode::Uniform;
        p.start_ps = field<double>(j, "start_ps");
        p.step_ps = field<double>(j, "step_ps");
        p.count = field<int>(j, "count");
    } else if (mode == "peak_centred") {
        p.mode = GridPlan::Mode::PeakCentred;
        p.step_ps = field<double>(j, "step_ps");
        p.before = field<int>(j, "before");
        p.after = field<int>(j, "after");
        const auto w = field_or<std::vector<double>>(j, "search_ps", {p.search_start_ps, p.search_end_ps});
        if (w.size() != 2) throw ValidationError("search_ps needs [start, end]", "time_grids.search_ps");
        p.search_start_ps = w[0];
        p.search_end_ps = w[1];
        p.search_pitch_ps = field_or<double>(j, "search_pitch_ps", p.search_pitch_ps);
    } else if (mode == "explicit") {
        p.mode = GridPlan::Mode::Explicit;
        for (auto& times : field<std::vector<std::vector<double>>>(j, "times_ps")) p.grids.emplace_back(times);
    } else {
        throw ValidationError("unknown time grid mode '" + mode + "'", "time_grids.mode");
    }
    return p;
}

// Static geometry used to place peak-centred grids.
Target initial_geometry(const Target& t) {
    if (const auto* m = std::get_if<MovingCuboidTarget>(&t)) return CuboidTarget{m->box_at(0.0), m->concentration};
    if (const auto* g = std::get_if<GrowingCuboidTarget>(&t)) return CuboidTarget{g->box_at(0.0), g->concentration};
    return t;
}

double vertex_distance(const Vec3& v, const Box& b) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double excess = std::max({b.lower[i] - v[i], 0.0, v[i] - b.upper[i]});
        sum += excess * excess;
    }
    return std::sqrt(sum);
}

double directed_hausdorff(const Box& a, const Box& b) {
    double worst = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 v{(corner & 1) ? a.upper[0] : a.lower[0], (corner & 2) ? a.upper[1] : a.lower[1],
                     (corner & 4) ? a.upper[2] : a.lower[2]};
        worst = std::max(worst, vertex_distance(v, b));
    }
    return worst;
}

}  // namespace

ParamVector Scenario::exact() const { return encode(target, layout, optical); }

const std::vector<std::string>& builtin_ids() {
    static const std::vector<std::string> ids{"ex1", "ex2", "ex3a", "ex3b", "ex4a", "ex4b"};
    return ids;
}

Scenario builtin(const std::string& id) {
    if (id == "ex1") return ex1();
    if (id == "ex2") return ex2();
    if (id == "ex3a") return ex3a();
    if (id == "ex3b") return ex3b();
    if (id == "ex4a") return ex4a();
    if (id == "ex4b") return ex4b();
    std::string valid;
    for (const auto& v : builtin_ids()) valid += (valid.empty() ? "" : ", ") + v;
    throw ValidationError("unknown scenario '" + id + "' (valid ids: " + valid + ")", "scenario");
}

void validate(const Scenario& s) {
    if (s.id.empty()) throw ValidationError("scenario id is empty", "id");
    validate(s.target);
    (void)s.exact();
    for (const auto& p : s.pairs) (void)make_pair(p.source, p.detector);
    validate(s.noise);
    if (s.runs < 1) throw ValidationError("runs must be at least 1", "runs");
    if (s.initial_guess) {
        if (s.initial_guess->layout != s.layout)
            throw LayoutError("initial guess layout differs from the scenario layout", "initial_guess");
        (void)decode(*s.initial_guess);
    }
    const GridPlan& g = s.grid_plan;
    switch (g.mode) {
        case GridPlan::Mode::Uniform:
            if (!(g.start_ps > 0) || !(g.step_ps > 0) || g.count < 1)
                throw ValidationError("uniform grid needs start > 0, step > 0, count >= 1", "time_grids");
            break;
        case GridPlan::Mode::PeakCentred:
            if (!(g.step_ps > 0) || g.before < 0 || g.after < 0 || !(g.search_pitch_ps > 0) ||
                !(g.search_start_ps > 0) || !(g.search_end_ps > g.search_start_ps))
                throw ValidationError("invalid peak-centred grid settings", "time_grids");
            break;
        case GridPlan::Mode::Explicit:
            if (g.grids.size() != s.pairs.size())
                throw ValidationError("explicit grids must match the number of pairs", "time_grids");
            break;
    }
    if (s.sweep && s.sweep->parameter != "depth" && s.sweep->parameter != "side")
        throw ValidationError("sweep parameter must be 'depth' or 'side'", "sweep.parameter");
}

json to_json(const Scenario& s) {
    const OpticalParams& o = s.optical;
    json j{{"id", s.id},
           {"description", s.description},
           {"optical_params",
            {{"c", o.c()}, {"mu_a", o.mu_a()}, {"mu_s", o.mu_s()}, {"g", o.g()}, {"beta", o.beta()}, {"tau", o.tau()}}},
           {"target", target_json(s.target)},
           {"layout", to_string(s.layout)},
           {"time_grids", plan_json(s.grid_plan)},
           {"noise", {{"epsilon", s.noise.epsilon}, {"seed", s.noise.seed}, {"runs", s.runs}}}};
    json pairs = json::array();
    for (const auto& p : s.pairs)
        pairs.push_back({{"source", {p.source.x1, p.source.x2}}, {"detector", {p.detector.x1, p.detector.x2}}});
    j["pairs"] = pairs;
    if (s.gate) j["gate_ps"] = {s.gate->start_ps, s.gate->end_ps};
    if (s.initial_guess) j["initial_guess"] = s.initial_guess->values;
    if (s.sweep) j["sweep"] = {{"parameter", s.sweep->parameter}, {"values", s.sweep->values}};
    return j;
}

Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("scenario must be a JSON object", "scenario");
    Scenario s;
    s.id = field<std::string>(j, "id");
    s.description = field_or<std::string>(j, "description", "");
    const json& o = j.at("optical_params");
    s.optical = OpticalParams(field<double>(o, "c"), field<double>(o, "mu_a"), field<double>(o, "mu_s"),
                              field<double>(o, "g"), field<double>(o, "beta"), field_or<double>(o, "tau", 0.0));
    if (!j.contains("target")) throw ValidationError("missing field 'target'", "target");
    s.target = target_from(j.at("target"));
    s.layout = layout_from_string(field<std::string>(j, "layout"));
    if (!j.contains("pairs")) throw ValidationError("missing field 'pairs'", "pairs");
    for (const auto& p : j.at("pairs")) s.pairs.push_back(make_pair(point_from(p, "source"), point_from(p, "detector")));
    if (!j.contains("time_grids")) throw ValidationError("missing field 'time_grids'", "time_grids");
    s.grid_plan = plan_from(j.at("time_grids"));
    if (j.contains("gate_ps")) {
        const auto g = field<std::vector<double>>(j, "gate_ps");
        if (g.size() != 2 || !(g[1] > g[0])) throw ValidationError("gate_ps needs [start, end] with end > start", "gate_ps");
        s.gate = GateWindow{g[0], g[1]};
    }
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        s.noise.epsilon = field_or<double>(n, "epsilon", 0.0);
        s.noise.seed = field_or<std::uint64_t>(n, "seed", 0);
        s.runs = field_or<int>(n, "runs", 1);
    }
    if (j.contains("initial_guess"))
        s.initial_guess = ParamVector{s.layout, field<std::vector<double>>(j, "initial_guess")};
    if (j.contains("sweep")) {
        const json& w = j.at("sweep");
        s.sweep = Sweep{field<std::string>(w, "parameter"), field<std::vector<double>>(w, "values")};
    }
    validate(s);
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file '" + path + "'", "scenario");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("scenario file '" + path + "' is not valid JSON: " + e.what(), "scenario");
    }
    return scenario_from_json(j);
}

Scenario resolve_scenario(const std::string& id_or_path) {
    const auto& ids = builtin_ids();
    if (std::find(ids.begin(), ids.end(), id_or_path) != ids.end()) return builtin(id_or_path);
    if (id_or_path.find('/') != std::string::npos || id_or_path.ends_with(".json")) return load_scenario(id_or_path);
    return builtin(id_or_path);
}

std::vector<TimeGrid> acquisition_grids(const Scenario& s, const QuadratureSpec& q) {
    const GridPlan& plan = s.grid_plan;
    std::vector<TimeGrid> grids;
    switch (plan.mode) {
        case GridPlan::Mode::Uniform:
            for (std::size_t k = 0; k < s.pairs.size(); ++k)
                grids.push_back(TimeGrid::uniform(plan.start_ps, plan.step_ps, std::size_t(plan.count)));
            return grids;
        case GridPlan::Mode::Explicit:
            if (plan.grids.size() != s.pairs.size())
                throw ValidationError("explicit grids must match the number of pairs", "time_grids");
            return plan.grids;
        case GridPlan::Mode::PeakCentred: break;
    }
    const Target frozen = initial_geometry(s.target);
    for (const auto& pair : s.pairs) {
        const auto f = [&](double t) { return tpsf(pair, frozen, t, s.optical, q); };
        const PeakFeatures peak = search_peak(f, plan.search_start_ps, plan.search_end_ps, plan.search_pitch_ps);
        const double first = peak.t_peak_ps - plan.before * plan.step_ps;
        if (!(first > 0)) {
            std::ostringstream msg;
            msg << "peak at " << peak.t_peak_ps << " ps is too early for " << plan.before << " samples of "
                << plan.step_ps << " ps before it";
            throw PeakSearchError(msg.str());
        }
        grids.push_back(TimeGrid::uniform(first, plan.step_ps, std::size_t(plan.before + plan.after + 1)));
    }
    return grids;
}

Acquisition acquisition(const Scenario& s, const QuadratureSpec& q) {
    auto grids = acquisition_grids(s, q);
    if (s.gate) return Acquisition::make(s.pairs, std::move(grids), *s.gate);
    return Acquisition::make(s.pairs, std::move(grids));
}

double hausdorff(const Box& a, const Box& b) { return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a)); }

Box box_of(const ParamVector& v, double u) {
    const Target t = decode(v);
    return std::visit(
        [u](const auto& x) -> Box {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PointTarget>) {
                return Box{x.center, x.center};
            } else if constexpr (std::is_same_v<T, CuboidTarget>) {
                return x.box;
            } else {
                return x.box_at(u);
            }
        },
        t);
}

Table depth_sweep_table(const Scenario& s, const QuadratureSpec& q) {
    const auto* point = std::get_if<PointTarget>(&s.target);
    if (!point || !s.sweep || s.sweep->parameter != "depth" || s.pairs.size() != 1)
        throw ValidationError("depth sweep needs a point target, one pair and a depth sweep", "sweep");
    const SDPair& pair = s.pairs.front();
    const GridPlan search = GridPlan{};
    Table table{{"depth_mm", "t_exact_ps", "t_approx_ps", "t_rel_err", "u_exact", "u_approx", "u_rel_err"}, {}};
    for (double depth : s.sweep->values) {
        const PointTarget target{{point->center[0], point->center[1], depth}, point->concentration};
        const auto f = [&](double t) { return tpsf_point(pair, target, t, s.optical, q); };
        const PeakFeatures exact = exact_peak(f, search.search_start_ps, search.search_end_ps, search.search_pitch_ps);
        const PeakConstants pc = peak_constants(pair, target.center, s.optical);
        const double t_approx = peak_time_approx(pc, s.optical);
        const double u_approx = peak_intensity_approx(pc, t_approx, target.concentration, s.optical);
        table.rows.push_back({depth, exact.t_peak_ps, t_approx, std::abs(t_approx - exact.t_peak_ps) / exact.t_peak_ps,
                              exact.u_peak, u_approx, std::abs(u_approx - exact.u_peak) / exact.u_peak});
    }
    return table;
}

Table side_sweep_table(const Scenario& s, const QuadratureSpec& q) {
    const auto* cuboid = std::get_if<CuboidTarget>(&s.target);
    if (!cuboid || !s.sweep || s.sweep->parameter != "side" || s.pairs.size() != 1)
        throw ValidationError("side sweep needs a cuboid target, one pair and a side sweep", "sweep");
    const SDPair& pair = s.pairs.front();
    const GridPlan search = GridPlan{};
    const Vec3 center = cuboid->box.center();
    const PointTarget point{center, cuboid->concentration};
    const PeakFeatures point_peak =
        exact_peak([&](double t) { return tpsf_point(pair, point, t, s.optical, q); }, search.search_start_ps,
                   search.search_end_ps, search.search_pitch_ps);
    const double t_closed = peak_time_approx(peak_constants(pair, center, s.optical), s.optical);

    Table table{{"side_mm", "t_cube_ps", "t_point_ps", "t_rel_err", "u_cube", "u_point_scaled", "u_rel_err",
                 "t_closed_form_ps", "t_closed_rel_err"},
                {}};
    for (double side : s.sweep->values) {
        const CuboidTarget target{cube(center, side), cuboid->concentration};
        const auto f = [&](double t) { return tpsf_cuboid(pair, target, t, s.optical, q); };
        const PeakFeatures exact = exact_peak(f, search.search_start_ps, search.search_end_ps, search.search_pitch_ps);
        const double u_scaled = target.box.volume() * point_peak.u_peak;
        table.rows.push_back({side, exact.t_peak_ps, point_peak.t_peak_ps,
                              std::abs(point_peak.t_peak_ps - exact.t_peak_ps) / exact.t_peak_ps, exact.u_peak,
                              u_scaled, std::abs(u_scaled - exact.u_peak) / exact.u_peak, t_closed,
                              std::abs(t_closed - exact.t_peak_ps) / exact.t_peak_ps});
    }
    return table;
}

Table tpsf_table(const Scenario& s, const QuadratureSpec& q) {
    const Acquisition acq = acquisition(s, q);
    const auto data = simulate(s.target, acq, s.optical, q);
    Table table{{"pair", "t_ps", "u"}, {}};
    std::size_t row = 0;
    for (std::size_t k = 0; k < acq.pairs.size(); ++k)
        for (double t : acq.grids[k].times_ps) table.rows.push_back({double(k), t, data[row++]});
    return table;
}

}  // namespace fdot
