#include <filesystem>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "turbkeps/cli.hpp"

int main(int argc, char** argv) {
    using namespace turbkeps;
    init_logging();

    CLI::App app{"Galerkin simulator and estimate auditor for a one-equation k-epsilon model in porous media"};
    app.require_subcommand(1);

    CliOptions opts;
    opts.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string config, out, trajectory;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config, "configuration file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->required();
        sub->add_flag("--json", opts.json, "print JSON to standard output");
        sub->add_flag("--override-admissibility", opts.override_admissibility,
                      "accept parameters that violate the admissibility conditions");
    };

    auto* run = app.add_subcommand("run", "simulate and audit one configuration");
    add_common(run, true);

    auto* sweep = app.add_subcommand("sweep", "uniformity study over the [sweep] section");
    add_common(sweep, true);
    sweep->add_option("--jobs", opts.jobs, "worker threads (default: logical cores)")->check(CLI::PositiveNumber);

    auto* audit = app.add_subcommand("audit", "re-run the audits on a stored trajectory");
    add_common(audit, false);
    audit->add_option("--trajectory", trajectory, "trajectory dump (default: <out>/trajectory.tkef)")
        ->check(CLI::ExistingFile);

    ModelParameters params;
    auto* exps = app.add_subcommand("exponents", "derived exponents and admissibility");
    exps->add_option("--d", params.d, "space dimension")->capture_default_str();
    exps->add_option("--alpha", params.alpha, "drag exponent")->capture_default_str();
    exps->add_option("--beta", params.beta, "production exponent")->capture_default_str();
    exps->add_option("--eta", params.eta, "viscosity growth")->capture_default_str();
    exps->add_option("--zeta", params.zeta, "diffusion growth")->capture_default_str();
    exps->add_option("--gamma", params.gamma, "production growth")->capture_default_str();
    exps->add_option("--theta", params.theta, "dissipation growth")->capture_default_str();
    exps->add_flag("--json", opts.json, "print JSON to standard output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitStatus::Config);
    }

    ExitStatus status = ExitStatus::Ok;
    if (*run) status = cmd_run(config, out, opts);
    else if (*sweep) status = cmd_sweep(config, out, opts);
    else if (*audit) {
        if (!trajectory.empty()) opts.trajectory = trajectory;
        status = cmd_audit(config, out, opts);
    } else if (*exps) status = cmd_exponents(params, opts);
    return static_cast<int>(status);
}
