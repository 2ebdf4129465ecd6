// Command-line front end: run, validate and params subcommands.
//
// Exit codes: 0 success, 1 config error, 2 solver error.

#include <CLI11.hpp>

#include <iostream>

#include "nmcool/errors.hpp"
#include "nmcool/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

int cmd_run(const std::string& path, int jobs, const std::string& out_dir) {
    const nmcool::ExperimentConfig cfg = nmcool::load_config(path);
    nmcool::RunOptions opts;
    opts.jobs = jobs;
    opts.out_dir = out_dir;
    opts.config_path = path;
    const nmcool::RunResult res = nmcool::run_experiment(cfg, opts, std::cout);
    for (const auto& f : res.files) std::cout << "wrote " << f << '\n';
    if (res.failed_points > 0) std::cout << res.failed_points << " grid point(s) failed; see the status column\n";
    return kOk;
}

int cmd_validate(const std::string& path) {
    const nmcool::ValidationReport rep = nmcool::validate_config_file(path);
    std::cout << "violations: " << (rep.violations.empty() ? "none" : "") << '\n';
    for (const auto& v : rep.violations) std::cout << "  " << v << '\n';
    std::cout << "warnings: " << (rep.warnings.empty() ? "none" : "") << '\n';
    for (const auto& w : rep.warnings) std::cout << "  " << w << '\n';
    return rep.violations.empty() ? kOk : kConfigError;
}

int cmd_params(const std::string& path) {
    const nmcool::ExperimentConfig cfg = nmcool::load_config(path);
    std::cout << nmcool::describe_params(cfg).dump(2) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nuclear-magnon laser cooling simulator"};
    app.set_version_flag("--version", nmcool::kVersion);
    app.require_subcommand(1);

    std::string config;
    int jobs = 1;
    std::string out_dir = ".";

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config, "JSON config file")->required();
    run->add_option("--jobs,-j", jobs, "Parallel workers for sweeps")->check(CLI::PositiveNumber);
    run->add_option("--out,-o", out_dir, "Output directory");

    auto* validate = app.add_subcommand("validate", "Check a config without solving");
    validate->add_option("config", config, "JSON config file")->required();

    auto* params = app.add_subcommand("params", "Print the resolved effective parameters");
    params->add_option("config", config, "JSON config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*run) return cmd_run(config, jobs, out_dir);
        if (*validate) return cmd_validate(config);
        if (*params) return cmd_params(config);
    } catch (const nmcool::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const nmcool::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const nmcool::IntegrationError& e) {
        std::cerr << "solver error: " << e.what() << " (time reached " << e.time_reached() << " s)\n";
        return kSolverError;
    } catch (const std::exception& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kSolverError;
    }
    return kOk;
}
