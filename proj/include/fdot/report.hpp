#pragma once

// Output files: CSV tables with a manifest back-reference and unit-bearing
// headers, JSON reports, and the run manifest itself.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdot/scenarios.hpp"

namespace fdot {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

struct RunManifest {
    std::string command;
    std::string scenario;
    std::vector<std::uint64_t> seeds;
    double rel_tol = 0.0;
    double eta = 0.0;
    std::string alpha;
    std::filesystem::path output_dir;
    std::string version = kVersion;
    double wall_clock_s = 0.0;
    bool finished = false;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& m);

/// Creates the output directory if needed and writes manifest.json.
void write_manifest(const RunManifest& m);

/// `# manifest=manifest.json`, a header row, then rows printed with 17 significant digits.
void write_csv(const std::filesystem::path& path, const Table& table);

/// Adds a "manifest" reference and writes indented JSON.
void write_json(const std::filesystem::path& path, nlohmann::json report);

/// Column names for the entries of a parameter vector, e.g. a1, b1, ... P.
std::vector<std::string> parameter_names(const ParamVector& v);

/// Per-run table: seed, err, converged, iterations, final misfit, then the parameters.
Table runs_table(const MultiRunResult& r);

/// Iteration history of one run: iteration, misfit, step_norm, alpha, alpha_flag.
Table history_table(const InversionResult& r);

/// Exact, initial and averaged parameters with Err, plus one entry per run.
nlohmann::json inversion_report(const Scenario& s, const ParamVector& a0, double epsilon, std::uint64_t base_seed,
                                const MultiRunResult& r);

/// Shortest representation that reads back to the same double.
std::string format_double(double x);

}  // namespace fdot
