#include "turbkeps/cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "turbkeps/auditor.hpp"
#include "turbkeps/config.hpp"
#include "turbkeps/exponents.hpp"
#include "turbkeps/field_io.hpp"
#include "turbkeps/solver.hpp"

namespace turbkeps {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

ExitStatus exit_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io:
        case ErrorKind::Data: return ExitStatus::Io;
        case ErrorKind::SolverAbort: return ExitStatus::SolverAbort;
        default: return ExitStatus::Config;
    }
}

void init_logging() {
    auto logger = spdlog::get("turbkeps");
    if (!logger) logger = spdlog::stderr_logger_mt("turbkeps");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("turbkeps [%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("TURBKEPS_LOG")) {
        const std::string v = env;
        if (v == "error") level = spdlog::level::err;
        else if (v == "info") level = spdlog::level::info;
        else if (v == "debug") level = spdlog::level::debug;
    }
    spdlog::set_level(level);
}

namespace {

std::ostream& out_of(const CliOptions& o) { return o.out ? *o.out : std::cout; }
std::ostream& err_of(const CliOptions& o) { return o.err ? *o.err : std::cerr; }

ExitStatus guarded(const CliOptions& opts, const std::function<ExitStatus()>& body) {
    try {
        return body();
    } catch (const Error& e) {
        err_of(opts) << "turbkeps: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_status(e.kind());
    } catch (const std::exception& e) {
        err_of(opts) << "turbkeps: " << e.what() << "\n";
        return ExitStatus::Config;
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Output files are written to hidden temporaries and renamed into place on
/// commit; anything not committed is removed.
class StagedDir {
public:
    explicit StagedDir(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw Error(ErrorKind::Io, "cannot create output directory " + dir_.string());
        const fs::path probe = dir_ / ".turbkeps-probe";
        {
            std::ofstream p(probe, std::ios::binary);
            if (!p) throw Error(ErrorKind::Io, "output directory not writable: " + dir_.string());
        }
        fs::remove(probe, ec);
    }
    StagedDir(const StagedDir&) = delete;
    StagedDir& operator=(const StagedDir&) = delete;
    ~StagedDir() {
        std::error_code ec;
        for (const auto& [tmp, name] : staged_) fs::remove(tmp, ec);
    }

    void add(const std::string& name, const std::string& content) {
        const fs::path tmp = dir_ / ("." + name + ".tmp");
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        staged_.emplace_back(tmp, name);
        if (!f.write(content.data(), static_cast<std::streamsize>(content.size())) || !f.flush())
            throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    }

    void commit() {
        for (const auto& [tmp, name] : staged_) {
            std::error_code ec;
            fs::rename(tmp, dir_ / name, ec);
            if (ec) throw Error(ErrorKind::Io, "cannot rename into " + (dir_ / name).string() + ": " + ec.message());
        }
        staged_.clear();
    }

    const fs::path& path() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::pair<fs::path, std::string>> staged_;
};

RunConfig load_config(const fs::path& path, const CliOptions& opts) {
    ConfigWarnings warnings;
    RunConfig cfg = parse_config(read_text(path), opts.override_admissibility, &warnings);
    const fs::path base = path.parent_path();
    auto resolve = [&](std::string& file) {
        if (!file.empty() && fs::path(file).is_relative()) file = (base / file).lexically_normal().string();
    };
    resolve(cfg.initial.u0_file);
    resolve(cfg.initial.k0_file);
    return cfg;
}

Json stats_json(const RunStats& s) {
    return {{"accepted_steps", s.accepted},
            {"rejected_steps", s.rejected},
            {"rhs_evaluations", s.rhs_evaluations},
            {"positivity_events", s.positivity_events},
            {"max_floored_mass", s.max_floored_mass},
            {"mollifier_under_resolved", s.mollifier_under_resolved},
            {"k0_below_C0", s.k0_below_C0},
            {"admissibility_overridden", s.admissibility_overridden}};
}

RunStats stats_from_json(const Json& j) {
    RunStats s;
    s.accepted = j.at("accepted_steps").get<long>();
    s.rejected = j.at("rejected_steps").get<long>();
    s.rhs_evaluations = j.at("rhs_evaluations").get<long>();
    s.positivity_events = j.at("positivity_events").get<long>();
    s.max_floored_mass = j.at("max_floored_mass").get<double>();
    s.mollifier_under_resolved = j.at("mollifier_under_resolved").get<bool>();
    s.k0_below_C0 = j.at("k0_below_C0").get<bool>();
    s.admissibility_overridden = j.at("admissibility_overridden").get<bool>();
    return s;
}

std::string hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json run_summary(const Trajectory& traj, const AuditReport& report) {
    long violated = 0;
    for (const auto& r : report.records) violated += r.verdict == "violated";
    return {{"samples", traj.states.size()},
            {"final_time", traj.states.empty() ? 0.0 : traj.states.back().t},
            {"hash", hex(trajectory_hash(traj))},
            {"stats", stats_json(traj.stats)},
            {"audit", {{"records", report.records.size()}, {"violated", violated}}}};
}

std::string trajectory_bytes(const Trajectory& traj, const Basis& basis) {
    std::ostringstream s(std::ios::binary);
    for (const auto& st : traj.states) write_tkef(s, to_record(state_field(st, basis), st.t));
    return s.str();
}

/// Stages every run artifact and returns the audit for the summary.
AuditReport stage_run(StagedDir& dir, const RunConfig& cfg, const Basis& basis, const Trajectory& traj) {
    const AuditReport report = audit(traj, cfg, basis);
    std::ostringstream diag;
    write_diagnostics_csv(diag, traj);
    dir.add("config.ini", serialize_config(cfg));
    dir.add("trajectory.tkef", trajectory_bytes(traj, basis));
    dir.add("diagnostics.csv", diag.str());
    dir.add("run.json", run_summary(traj, report).dump(2) + "\n");
    dir.add("audit.json", to_json(report));
    dir.add("audit.csv", to_csv(report));
    return report;
}

void print_audit_table(std::ostream& o, const AuditReport& rep) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-34s %-10s %14s %14s\n", "estimate", "verdict", "lhs", "rhs_or_bound");
    o << buf;
    for (const auto& r : rep.records) {
        char rhs[32] = "-";
        if (r.rhs) std::snprintf(rhs, sizeof rhs, "%.6e", *r.rhs);
        std::snprintf(buf, sizeof buf, "%-34s %-10s %14.6e %14s\n", r.name.c_str(), r.verdict.c_str(), r.lhs, rhs);
        o << buf;
    }
    if (rep.positivity_violations > 0) o << "positivity violations: " << rep.positivity_violations << "\n";
    for (const auto& n : rep.notes) o << "note: " << n << "\n";
}

int level_of(const RunConfig& cfg, SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Truncation: return cfg.n;
        case SweepAxis::J: return cfg.j;
        case SweepAxis::L: return cfg.l;
    }
    return 0;
}

std::vector<StepDiagnostics> read_diagnostics(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<StepDiagnostics> steps;
    std::getline(in, line);
    if (line.rfind("t,dt,local_error,min_k,energy_residual", 0) != 0)
        throw Error(ErrorKind::Data, path.string() + ": unexpected diagnostics header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double v[5];
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int i = 0; i < 5; ++i) {
            const auto r = std::from_chars(p, end, v[i]);
            if (r.ec != std::errc() || (i < 4 && (r.ptr == end || *r.ptr != ',')) || (i == 4 && r.ptr != end))
                throw Error(ErrorKind::Data, path.string() + ": malformed row '" + line + "'");
            p = r.ptr + 1;
        }
        steps.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
    return steps;
}

Json exact_json(const ExactReal& x) {
    return {{"exact", x.str()}, {"value", x.value()}, {"is_exact", x.is_exact()}};
}

}  // namespace

ExitStatus cmd_run(const fs::path& config_path, const fs::path& out_dir, const CliOptions& opts) {
    return guarded(opts, [&] {
        const RunConfig cfg = load_config(config_path, opts);
        StagedDir dir(out_dir);
        const Basis basis = build_basis(cfg.spec, cfg.j, cfg.l);
        const Trajectory traj = run(cfg, basis);
        const AuditReport report = stage_run(dir, cfg, basis, traj);
        dir.commit();
        if (opts.json) {
            Json j = run_summary(traj, report);
            j["out_dir"] = out_dir.string();
            out_of(opts) << j.dump(2) << "\n";
        } else {
            out_of(opts) << "run complete: " << traj.states.size() << " samples, " << traj.stats.accepted
                         << " accepted steps -> " << out_dir.string() << "\n";
            print_audit_table(out_of(opts), report);
        }
        return ExitStatus::Ok;
    });
}

ExitStatus cmd_sweep(const fs::path& config_path, const fs::path& out_dir, const CliOptions& opts) {
    return guarded(opts, [&] {
        const RunConfig cfg = load_config(config_path, opts);
        if (!cfg.sweep) throw Error(ErrorKind::Config, config_path.string() + " has no [sweep] section");
        StagedDir dir(out_dir);
        const SweepAxis axis = cfg.sweep->axis;
        auto sink = [&](const RunConfig& level_cfg, const Basis& basis, const Trajectory& traj) {
            StagedDir level(out_dir / (std::string(to_string(axis)) + "_" + std::to_string(level_of(level_cfg, axis))));
            stage_run(level, level_cfg, basis, traj);
            level.commit();
        };
        const UniformityReport rep = uniformity_study(cfg, *cfg.sweep, opts.jobs, sink);
        const std::string text = to_json(rep);
        dir.add("sweep.json", text);
        dir.commit();
        if (opts.json) {
            out_of(opts) << text;
        } else {
            auto& o = out_of(opts);
            for (const auto& r : rep.results)
                o << to_string(axis) << " = " << r.level << ": "
                  << (r.ok ? "ok  hash " + hex(r.hash) : "FAILED  " + r.failure) << "\n";
            o << "verdict: " << rep.verdict << "  cauchy: " << (rep.cauchy ? "true" : "false") << "\n";
        }
        if (rep.partial) {
            err_of(opts) << "turbkeps: sweep incomplete, see " << (out_dir / "sweep.json").string() << "\n";
            return ExitStatus::PartialSweep;
        }
        return ExitStatus::Ok;
    });
}

ExitStatus cmd_audit(const fs::path& config_path, const fs::path& out_dir, const CliOptions& opts) {
    return guarded(opts, [&] {
        const RunConfig cfg = load_config(config_path.empty() ? out_dir / "config.ini" : config_path, opts);
        const Basis basis = build_basis(cfg.spec, cfg.j, cfg.l);
        Trajectory traj;
        for (const auto& rec : read_tkef_file(opts.trajectory.value_or(out_dir / "trajectory.tkef")))
            traj.states.push_back(state_from_field(from_record(rec, cfg.spec), rec.time, basis));
        if (traj.states.empty()) throw Error(ErrorKind::Data, "trajectory holds no states");
        if (fs::exists(out_dir / "diagnostics.csv")) traj.steps = read_diagnostics(out_dir / "diagnostics.csv");
        if (fs::exists(out_dir / "run.json")) {
            try {
                traj.stats = stats_from_json(Json::parse(read_text(out_dir / "run.json")).at("stats"));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorKind::Data, "run.json: " + std::string(e.what()));
            }
        } else {
            for (const auto& s : traj.steps) traj.stats.positivity_events += s.min_k < 0.0;
        }
        const AuditReport report = audit(traj, cfg, basis);
        StagedDir dir(out_dir);
        dir.add("audit.json", to_json(report));
        dir.add("audit.csv", to_csv(report));
        dir.commit();
        if (opts.json) out_of(opts) << to_json(report);
        else print_audit_table(out_of(opts), report);
        return ExitStatus::Ok;
    });
}

std::string exponents_json(const ModelParameters& p) {
    const AdmissibilityReport rep = check_admissibility(p);
    const DerivedExponents& e = rep.derived;
    Json ex;
    ex["r_u"] = exact_json(e.r_u);
    ex["rho_k"] = exact_json(e.rho_k);
    ex["r_k"] = exact_json(e.r_k);
    ex["sigma_terms"] = Json::array({exact_json(e.sigma_terms[0]), exact_json(e.sigma_terms[1]),
                                     exact_json(e.sigma_terms[2])});
    ex["sigma0"] = exact_json(e.sigma0);
    ex["sigma_drag_branch"] = e.sigma_drag_branch;
    ex["rho1"] = exact_json(e.rho1);
    ex["rho2"] = exact_json(e.rho2);
    ex["rho3"] = exact_json(e.rho3);
    ex["rho4"] = exact_json(e.rho4);
    ex["rho5"] = exact_json(e.rho5);
    ex["rho0"] = exact_json(e.rho0);
    ex["rho0_reduced"] = exact_json(e.rho0_reduced);
    ex["q_gradient"] = exact_json(e.q_gradient);
    ex["q_gradient_attained"] = e.q_gradient_attained;

    const bool ok[] = {rep.cond1_ok, rep.cond2_ok, rep.cond3_ok};
    const char* statements[] = {"eta < r_k", "theta < zeta + 2/d", "gamma/(theta+1) + beta/r_u < 1"};
    Json conds = Json::array();
    for (int i = 0; i < 3; ++i)
        conds.push_back({{"name", "Cond" + std::to_string(i + 1)},
                         {"statement", statements[i]},
                         {"satisfied", ok[i]},
                         {"margin", exact_json(rep.margins[static_cast<std::size_t>(i)])}});

    Json j;
    j["parameters"] = {{"d", p.d},         {"alpha", p.alpha}, {"beta", p.beta}, {"eta", p.eta},
                       {"zeta", p.zeta},   {"gamma", p.gamma}, {"theta", p.theta}};
    j["exponents"] = ex;
    j["admissibility"] = {{"admissible", rep.admissible()},
                          {"first_violation", rep.first_violation()},
                          {"conditions", conds}};
    return j.dump(2) + "\n";
}

ExitStatus cmd_exponents(const ModelParameters& params, const CliOptions& opts) {
    return guarded(opts, [&] {
        params.validate();
        if (opts.json) {
            out_of(opts) << exponents_json(params);
            return ExitStatus::Ok;
        }
        const AdmissibilityReport rep = check_admissibility(params);
        const DerivedExponents& e = rep.derived;
        auto& o = out_of(opts);
        char buf[256];
        auto row = [&](const char* name, const ExactReal& x) {
            std::snprintf(buf, sizeof buf, "%-14s %-16s %.12g\n", name, x.str().c_str(), x.value());
            o << buf;
        };
        std::snprintf(buf, sizeof buf, "%-14s %-16s %s\n", "exponent", "exact", "value");
        o << buf;
        row("r_u", e.r_u);
        row("rho_k", e.rho_k);
        row("r_k", e.r_k);
        row("sigma0", e.sigma0);
        row("rho1", e.rho1);
        row("rho2", e.rho2);
        row("rho3", e.rho3);
        row("rho4", e.rho4);
        row("rho5", e.rho5);
        row("rho0", e.rho0);
        row("rho0_reduced", e.rho0_reduced);
        row("q_gradient", e.q_gradient);
        o << "q_gradient " << (e.q_gradient_attained ? "attained" : "is a supremum (excluded)") << "\n\n";
        const bool ok[] = {rep.cond1_ok, rep.cond2_ok, rep.cond3_ok};
        const char* statements[] = {"eta < r_k", "theta < zeta + 2/d", "gamma/(theta+1) + beta/r_u < 1"};
        for (int i = 0; i < 3; ++i) {
            std::snprintf(buf, sizeof buf, "Cond%d  %-32s %-4s margin %s\n", i + 1, statements[i], ok[i] ? "ok" : "FAIL",
                          rep.margins[static_cast<std::size_t>(i)].str().c_str());
            o << buf;
        }
        o << "admissible: " << (rep.admissible() ? "yes" : "no") << "\n";
        return ExitStatus::Ok;
    });
}

}  // namespace turbkeps
