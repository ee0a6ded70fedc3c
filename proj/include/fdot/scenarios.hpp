#pragma once

// Named experiment configurations, their JSON form, acquisition grids and the
// tabulated peak comparisons behind the localization figures.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdot/forward.hpp"
#include "fdot/inversion.hpp"
#include "fdot/model.hpp"

namespace fdot {

/// How each pair's sample times are chosen.
struct GridPlan {
    enum class Mode {
        // Uniform grid shared by all pairs.
        Uniform,
        // `before` samples ahead of and `after` samples past the pair's peak on the exact target.
        PeakCentred,
        // One explicit grid per pair.
        Explicit,
    };
    Mode mode = Mode::Uniform;
    double start_ps = 1.0;
    double step_ps = 1.0;
    int count = 400;
    int before = 10;
    int after = 9;
    double search_start_ps = 1.0;
    double search_end_ps = 5000.0;
    double search_pitch_ps = 1.0;
    std::vector<TimeGrid> grids;
};

struct Sweep {
    std::string parameter;  // "depth" (mm) or "side" (mm)
    std::vector<double> values;
};

struct Scenario {
    std::string id;
    std::string description;
    OpticalParams optical = OpticalParams::tissue_defaults();
    Target target;
    Layout layout = Layout::Cuboid7;
    std::vector<SDPair> pairs;
    GridPlan grid_plan;
    std::optional<GateWindow> gate;
    NoiseSpec noise;
    int runs = 1;
    std::optional<ParamVector> initial_guess;
    std::optional<Sweep> sweep;

    /// Exact parameters in `layout`.
    ParamVector exact() const;
};

const std::vector<std::string>& builtin_ids();

/// Throws ValidationError listing the valid ids when `id` is unknown.
Scenario builtin(const std::string& id);

void validate(const Scenario& s);

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// Reads a scenario file; ValidationError when it is missing or malformed.
Scenario load_scenario(const std::string& path);

/// Builtin id or path to a JSON file.
Scenario resolve_scenario(const std::string& id_or_path);

/// Sample times per pair. Peak-centred grids are placed on the exact target; a
/// time-dependent target is frozen at its initial geometry for this purpose.
std::vector<TimeGrid> acquisition_grids(const Scenario& s, const QuadratureSpec& q);

Acquisition acquisition(const Scenario& s, const QuadratureSpec& q);

/// Hausdorff distance between two solid axis-aligned boxes.
double hausdorff(const Box& a, const Box& b);

/// Box described by a parameter vector at normalized time u.
Box box_of(const ParamVector& v, double u);

/// Plot-ready table: column names carry units.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

/// Exact vs closed-form peak time and intensity over the depth sweep (point target).
Table depth_sweep_table(const Scenario& s, const QuadratureSpec& q);

/// Exact cube peaks vs the point target at the cube centre over the side sweep.
Table side_sweep_table(const Scenario& s, const QuadratureSpec& q);

/// TPSF of every pair on its grid: columns pair, t_ps, u.
Table tpsf_table(const Scenario& s, const QuadratureSpec& q);

}  // namespace fdot
