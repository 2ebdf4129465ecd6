#pragma once

// Batch experiment runner behind the command-line tool: JSON config schema,
// parameter resolution with overrides, dispatch per mode and CSV/JSON output.

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmcool/liouvillian.hpp"
#include "nmcool/magnonics.hpp"
#include "nmcool/protocols.hpp"
#include "nmcool/units.hpp"

namespace nmcool {

inline constexpr const char* kVersion = "1.0.0";

enum class RunMode { params, dispersion, cool, steady, sweep, qswitch };

const char* to_string(RunMode m);

/// Direct values for the effective parameters; each one set here wins over derivation.
struct EffectiveOverrides {
    std::optional<double> omega_0, detuning, G_h, kappa_0, kappa_h, n_th;
};

struct RunSpec {
    std::string label;
    EffectiveOverrides effective;
    std::optional<double> t_end;
};

struct TimeSpec {
    std::optional<double> t_end;  // absent: t_end_factor / slowest_relaxation_rate
    double t_end_factor = 20;
    int samples = 2001;
};

struct QSwitchSpec {
    double kappa_low = 0;
    std::optional<double> kappa_high;  // absent: fast_dump_rate
    std::optional<double> hold_time;   // absent: pi / (2 G_h)
    std::optional<double> dump_time;   // absent: 5 / kappa_high
    int cycles = 1;
};

struct DispersionSpec {
    int points = 101;
    Eigen::Vector3d k_end = Eigen::Vector3d::Zero();  // zero: X point of the lattice
};

struct ExperimentConfig {
    std::string name;
    RunMode mode = RunMode::steady;
    std::optional<PhysicalConfig> physical;
    std::optional<double> n_0_ref;
    EffectiveOverrides effective;
    std::vector<RunSpec> runs;  // empty: a single run of the base parameters
    int dim_magnon = 12;
    int dim_photon = 12;
    Frame frame = Frame::co_rotating;
    TimeSpec time;
    std::vector<SweepAxis> sweep_axes;
    QSwitchSpec qswitch;
    DispersionSpec dispersion;
    IntegratorOptions integrator;
    std::optional<Eigen::Index> dense_limit;  // absent: 3000, or 0 (sparse) for sweeps
    std::string output_prefix;

    FockSpace space() const { return FockSpace(dim_magnon, dim_photon); }
};

/// Parses a config document. Unknown keys and unit mismatches throw ConfigError naming the key path.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& default_name = "experiment");

/// Reads and parses a config file; the file stem is the default name.
ExperimentConfig load_config(const std::string& path);

struct ResolvedParams {
    EffectiveParams params;
    std::map<std::string, std::string> source;  // field -> "derived" | "override" | "default"
};

/// Derivation from the physical block, then base overrides, then run overrides.
ResolvedParams resolve_params(const ExperimentConfig& cfg, const EffectiveOverrides& run = {});

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;
};

/// Physics sanity checks without solving: positive rates and the truncation heuristic 6 n_th < dim.
ValidationReport validate_experiment(const ExperimentConfig& cfg);

/// Schema and physics checks on a config file; never throws for content problems.
ValidationReport validate_config_file(const std::string& path);

/// Resolved parameters of every run plus the physical-pipeline outputs, as printed by `params`.
nlohmann::json describe_params(const ExperimentConfig& cfg);

/// Config equivalent to `cfg` with every effective parameter and time span written out.
nlohmann::json resolved_config(const ExperimentConfig& cfg);

struct RunOptions {
    int jobs = 1;
    std::string out_dir = ".";
    std::string config_path;
};

struct RunResult {
    std::vector<std::string> files;
    int failed_points = 0;
};

/// Runs the experiment and writes CSV and metadata files. Solver failures propagate as SolverError.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

/// Comma-separated row with round-trip numbers, newline-terminated.
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace nmcool
