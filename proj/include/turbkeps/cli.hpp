#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "turbkeps/errors.hpp"
#include "turbkeps/model.hpp"

namespace turbkeps {

/// Exit statuses of the command-line tool.
enum class ExitStatus : int { Ok = 0, Config = 1, Io = 2, PartialSweep = 3, SolverAbort = 4 };

ExitStatus exit_status(ErrorKind kind);

struct CliOptions {
    bool json = false;
    bool override_admissibility = false;
    int jobs = 1;
    /// audit: trajectory to replay instead of <out>/trajectory.tkef.
    std::optional<std::filesystem::path> trajectory;
    std::ostream* out = nullptr;  ///< stdout when null
    std::ostream* err = nullptr;  ///< stderr when null
};

/// Installs the default stderr logger at the level named by TURBKEPS_LOG
/// (error, warn, info, debug; warn when unset or unrecognized).
void init_logging();

/// Runs the configured simulation and every enabled audit. Writes
/// config.ini, trajectory.tkef, diagnostics.csv, run.json, audit.json and
/// audit.csv into out_dir, all or nothing.
ExitStatus cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                   const CliOptions& opts);

/// Uniformity study over the [sweep] section: sweep.json plus one
/// subdirectory of run artifacts per successful level.
ExitStatus cmd_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                     const CliOptions& opts);

/// Re-runs the audits on a stored trajectory. The configuration defaults to
/// <out>/config.ini when config_path is empty.
ExitStatus cmd_audit(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                     const CliOptions& opts);

/// Prints the derived exponents and the admissibility report.
ExitStatus cmd_exponents(const ModelParameters& params, const CliOptions& opts);

std::string exponents_json(const ModelParameters& params);

}  // namespace turbkeps
