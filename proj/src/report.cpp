#include "fdot/report.hpp"

#include <charconv>
#include <fstream>
#include <limits>

#include "fdot/error.hpp"

namespace fdot {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'", "out");
    return out;
}

}  // namespace

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"scenario", m.scenario},
            {"seeds", m.seeds},
            {"rel_tol", m.rel_tol},
            {"eta", m.eta},
            {"alpha", m.alpha},
            {"output_dir", m.output_dir.string()},
            {"version", m.version},
            {"wall_clock_s", m.wall_clock_s},
            {"finished", m.finished},
            {"details", m.extra}};
}

void write_manifest(const RunManifest& m) {
    std::filesystem::create_directories(m.output_dir);
    auto out = open_output(m.output_dir / kManifestName);
    out << to_json(m).dump(2) << '\n';
}

void write_csv(const std::filesystem::path& path, const Table& table) {
    auto out = open_output(path);
    out << "# manifest=" << kManifestName << '\n';
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
}

std::vector<std::string> parameter_names(const ParamVector& v) {
    check_length(v);
    const std::vector<std::string> box{"a1", "b1", "a2", "b2", "a3", "b3"};
    std::vector<std::string> names;
    switch (v.layout) {
        case Layout::Point4: return {"x_c1", "x_c2", "x_c3", "P"};
        case Layout::Cuboid7:
            names = box;
            names.push_back("P");
            return names;
        case Layout::Joint9:
            names = {"mu_s", "mu_a"};
            names.insert(names.end(), box.begin(), box.end());
            names.push_back("P");
            return names;
        case Layout::GrowingCuboid:
            names = {"x_c1", "x_c2", "x_c3", "P"};
            for (std::size_t k = 0; k + 4 < v.size(); ++k) names.push_back("L_" + std::to_string(k));
            return names;
        case Layout::MovingCuboid: {
            const std::size_t per = (v.size() - 2) / 3;
            for (int c = 1; c <= 3; ++c)
                for (std::size_t k = 0; k < per; ++k)
                    names.push_back("x_c" + std::to_string(c) + "_" + std::to_string(k));
            names.push_back("L");
            names.push_back("P");
            return names;
        }
    }
    return names;
}

Table runs_table(const MultiRunResult& r) {
    Table t{{"seed", "err", "converged", "iterations", "misfit"}, {}};
    if (r.runs.empty()) return t;
    const ParamVector* shape = nullptr;
    for (const auto& run : r.runs)
        if (!run.failed) shape = &run.result.a;
    if (shape)
        for (const auto& n : parameter_names(*shape)) t.columns.push_back(n);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& run : r.runs) {
        std::vector<double> row{double(run.seed), run.failed ? nan : run.err,
                                run.failed ? 0.0 : double(run.result.converged),
                                double(run.result.history.size()),
                                run.result.history.empty() ? nan : run.result.history.back().misfit};
        if (shape) {
            if (run.failed) row.resize(t.columns.size(), nan);
            else row.insert(row.end(), run.result.a.values.begin(), run.result.a.values.end());
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table history_table(const InversionResult& r) {
    Table t{{"iteration", "misfit", "step_norm", "alpha", "alpha_flag"}, {}};
    for (const auto& h : r.history)
        t.rows.push_back({double(h.iteration), h.misfit, h.step_norm, h.alpha, double(h.alpha_flag)});
    return t;
}

nlohmann::json inversion_report(const Scenario& s, const ParamVector& a0, double epsilon, std::uint64_t base_seed,
                                const MultiRunResult& r) {
    const ParamVector exact = s.exact();
    const auto names = parameter_names(exact);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i)
        rows.push_back({{"parameter", names[i]},
                        {"exact", exact.values[i]},
                        {"initial", a0.values[i]},
                        {"recovered", r.average.values.at(i)}});
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : r.runs) {
        nlohmann::json j{{"seed", run.seed}, {"failed", run.failed}};
        if (run.failed) {
            j["message"] = run.message;
        } else {
            j["err"] = run.err;
            j["converged"] = run.result.converged;
            j["stop"] = std::string(to_string(run.result.stop));
            j["iterations"] = run.result.history.size();
            j["recovered"] = run.result.a.values;
            j["warnings"] = run.result.warnings;
        }
        runs.push_back(std::move(j));
    }
    return {{"scenario", s.id},
            {"layout", std::string(to_string(exact.layout))},
            {"epsilon", epsilon},
            {"base_seed", base_seed},
            {"runs_requested", r.runs.size()},
            {"failures", r.failures},
            {"table", rows},
            {"err", r.err},
            {"runs", runs}};
}

void write_json(const std::filesystem::path& path, nlohmann::json report) {
    report["manifest"] = kManifestName;
    auto out = open_output(path);
    out << report.dump(2) << '\n';
}

}  // namespace fdot
