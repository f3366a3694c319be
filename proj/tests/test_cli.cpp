#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "doctest.h"
#include "turbkeps/auditor.hpp"
#include "turbkeps/cli.hpp"
#include "turbkeps/config.hpp"
#include "turbkeps/errors.hpp"
#include "turbkeps/exponents.hpp"

using namespace turbkeps;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& scratch_root() {
    static const struct Root {
        fs::path path = fs::temp_directory_path() / ("turbkeps_cli_" + std::to_string(::getpid()));
        ~Root() {
            std::error_code ec;
            fs::remove_all(path, ec);
        }
    } root;
    return root.path;
}

fs::path scratch(const std::string& name) {
    const fs::path p = scratch_root() / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

fs::path write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        return e.what();
    }
    FAIL("config accepted: " << text);
    return {};
}

// single cosine mode at energy 1/4 on a constant k: the viscous decay oracle
const std::string kDecayConfig = R"(# decay oracle
[model]
T_final = 0.25
[domain]
N = 16
[truncation]
j = 8
l = 8
[initial]
u0 = mode
u0_amplitude = 0.70710678118654752
k0_value = 1
mollify = false
[output]
uniform_intervals = 128
geometric_levels = 6
)";

int shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config: empty text yields the documented defaults") {
    const RunConfig cfg = parse_config("");
    CHECK(cfg == RunConfig{});
    CHECK(cfg.params.d == 2);
    CHECK(cfg.spec.mode == DomainMode::PeriodicTorus2D);
    CHECK(cfg.n == 8);
    CHECK(cfg.j == 16);
    CHECK(cfg.l == 16);
    CHECK_FALSE(cfg.sweep);
}

TEST_CASE("config: syntax errors name the line") {
    CHECK(config_error("[model]\n\nalpha 3\n").find("line 3") != std::string::npos);
    CHECK(config_error("[model]\nfoo = 1\n").find("unknown key 'foo'") != std::string::npos);
    CHECK(config_error("[nowhere]\n").find("unknown section") != std::string::npos);
    CHECK(config_error("[model]\nalpha = 3\nalpha = 4\n").find("line 3: duplicate") != std::string::npos);
    CHECK(config_error("[model]\nalpha = 3x\n").find("line 2") != std::string::npos);
    CHECK(config_error("alpha = 3\n").find("outside any section") != std::string::npos);
    CHECK(config_error("[model\n").find("malformed section") != std::string::npos);
    CHECK(config_error("[truncation]\ncutoff = yes\n").find("true or false") != std::string::npos);
    CHECK(config_error("[domain]\nmode = sphere\n").find("torus|box") != std::string::npos);
    CHECK(config_error("[model]\nalpha = 0.5\n").find("alpha") != std::string::npos);
    CHECK(config_error("[sweep]\naxis = j\n").find("levels") != std::string::npos);
}

TEST_CASE("config: inadmissible parameters are rejected naming the condition") {
    const std::string text = "[model]\nd = 3\neta = 2\nzeta = 0\n";
    const std::string msg = config_error(text);
    CHECK(msg.find("Cond1") != std::string::npos);
    CHECK(msg.find("r_k = 5/3") != std::string::npos);
    CHECK(config_error("[model]\ntheta = 1\n").find("Cond2") != std::string::npos);
    CHECK(config_error("[model]\nbeta = 4.5\n").find("Cond3") != std::string::npos);

    SUBCASE("override in the text") {
        ConfigWarnings w;
        const RunConfig cfg = parse_config(text + "override_admissibility = true\n", false, &w);
        CHECK(cfg.override_admissibility);
        CHECK(w.admissibility_overridden);
        REQUIRE(w.messages.size() == 1);
        CHECK(w.messages[0].find("Cond1") != std::string::npos);
    }
    SUBCASE("override from the caller") {
        ConfigWarnings w;
        const RunConfig cfg = parse_config(text, true, &w);
        CHECK(cfg.override_admissibility);
        CHECK(w.admissibility_overridden);
    }
    SUBCASE("admissible text raises no warning") {
        ConfigWarnings w;
        parse_config("[model]\nd = 3\nalpha = 2\ngamma = 0.3\n", false, &w);
        CHECK_FALSE(w.admissibility_overridden);
        CHECK(w.messages.empty());
    }
}

TEST_CASE("config: parse after serialize is the identity") {
    spdlog::set_level(spdlog::level::err);
    std::mt19937_64 rng(20261015);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto pos = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
    for (int trial = 0; trial < 300; ++trial) {
        RunConfig c;
        auto& p = c.params;
        p.d = 2 + static_cast<int>(rng() % 3);
        p.alpha = pos(1.01, 6.0);
        p.beta = pos(0.01, 3.0);
        p.eta = pos(0.0, 2.0);
        p.zeta = pos(0.0, 2.0);
        p.gamma = pos(0.0, 2.0);
        p.theta = pos(0.0, 2.0);
        p.cT = pos(0.1, 2.0);
        p.CT = p.cT + pos(0.0, 1.0);
        p.cD = pos(0.1, 2.0);
        p.CD = p.cD + pos(0.0, 1.0);
        p.cP = pos(0.1, 2.0);
        p.CP = p.cP + pos(0.0, 1.0);
        p.cEps = pos(0.1, 2.0);
        p.CEps = p.cEps + pos(0.0, 1.0);
        p.cDa = pos(0.0, 2.0);
        p.cFo = pos(0.0, 2.0);
        p.C0 = pos(1e-3, 2.0);
        p.T_final = pos(1e-3, 5.0);
        c.override_admissibility = !check_admissibility(p).admissible() || rng() % 2;
        c.spec.mode = rng() % 2 ? DomainMode::PeriodicTorus2D : DomainMode::DirichletBox2D;
        c.spec.extent = {pos(0.1, 10.0), pos(0.1, 10.0)};
        c.spec.N = 8 + 2 * static_cast<int>(rng() % 30);
        c.n = 1 + static_cast<int>(rng() % 100);
        c.j = 1 + static_cast<int>(rng() % 40);
        c.l = 1 + static_cast<int>(rng() % 40);
        c.apply_cutoff = rng() % 2;
        c.positivity = rng() % 2 ? PositivityPolicy::Monitor : PositivityPolicy::Floor;
        c.integrator = {pos(1e-12, 1e-3), pos(1e-15, 1e-6), pos(1e-3, 1.0), pos(1e-8, 1e-3),
                        1 + static_cast<long>(rng() % 1000000)};
        c.initial.u0 = static_cast<InitialSpec::Velocity>(rng() % 3);
        c.initial.u0_mode = static_cast<int>(rng() % static_cast<unsigned>(c.j));
        c.initial.u0_amplitude = pos(-2.0, 2.0);
        c.initial.u0_file = rng() % 2 ? "" : "fields/u0.tkef";
        c.initial.k0 = static_cast<InitialSpec::Tke>(rng() % 3);
        c.initial.k0_value = pos(0.0, 3.0);
        c.initial.k0_amplitude = pos(-1.0, 1.0);
        c.initial.k0_file = rng() % 2 ? "" : "k0 data.csv";
        c.initial.mollify = rng() % 2;
        c.forcing.kind = static_cast<Forcing::Kind>(rng() % 3);
        c.forcing.vector = {pos(-1.0, 1.0), pos(-1.0, 1.0)};
        c.forcing.mode = static_cast<int>(rng() % static_cast<unsigned>(c.j));
        c.forcing.amplitude = pos(-1.0, 1.0);
        c.output.uniform_intervals = 2 * (1 + static_cast<int>(rng() % 600));
        c.output.geometric_levels = static_cast<int>(rng() % 61);
        for (int k = static_cast<int>(rng() % 4); k > 0; --k) c.output.extra_times.push_back(pos(0.0, p.T_final));
        c.output.energy = rng() % 2;
        c.output.tke_l1 = rng() % 2;
        c.output.gradient = rng() % 2;
        c.output.transport = rng() % 2;
        c.output.ic = rng() % 2;
        c.output.weak_residual = rng() % 2;
        if (rng() % 2) {
            SweepSpec s{static_cast<SweepAxis>(rng() % 3), {}};
            for (int v = 1 + static_cast<int>(rng() % 4), k = 0; k < 3 + trial % 3; ++k, v *= 2) s.levels.push_back(v);
            c.sweep = s;
        }
        c.validate();
        const std::string text = serialize_config(c);
        CAPTURE(text);
        REQUIRE(parse_config(text) == c);
        CHECK(serialize_config(parse_config(text)) == text);
    }
}

TEST_CASE("cmd_run: decay oracle writes every artifact, reproducibly") {
    const fs::path dir = scratch("run");
    const fs::path cfg = write_file(dir / "decay.ini", kDecayConfig);
    std::ostringstream out, err;
    CliOptions opts;
    opts.json = true;
    opts.out = &out;
    opts.err = &err;
    REQUIRE(cmd_run(cfg, dir / "a", opts) == ExitStatus::Ok);
    CHECK(err.str().empty());
    for (const char* f : {"trajectory.tkef", "diagnostics.csv", "audit.json", "audit.csv", "run.json", "config.ini"})
        CHECK(fs::is_regular_file(dir / "a" / f));
    for (const auto& e : fs::directory_iterator(dir / "a")) CHECK(e.path().filename().string().front() != '.');

    const json summary = json::parse(out.str());
    // T 2^-m for m <= 6 already lies on the 128-interval grid
    CHECK(summary["samples"].get<int>() == 128 + 1);
    CHECK(summary["stats"]["positivity_events"] == 0);

    const json audit = json::parse(slurp(dir / "a" / "audit.json"));
    bool found = false;
    for (const auto& r : audit["records"]) {
        if (r["name"] != "energy_identity_residual") continue;
        found = true;
        CHECK(r["lhs"].get<double>() < 1e-6);
        CHECK(r["verdict"] == "satisfied");
    }
    CHECK(found);

    SUBCASE("rerun is byte-identical") {
        std::ostringstream sink;
        opts.out = &sink;
        REQUIRE(cmd_run(cfg, dir / "b", opts) == ExitStatus::Ok);
        for (const char* f : {"trajectory.tkef", "diagnostics.csv", "audit.json", "audit.csv"})
            CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    SUBCASE("audit replay reproduces the report") {
        std::ostringstream sink;
        opts.out = &sink;
        fs::copy(dir / "a", dir / "c");
        fs::remove(dir / "c" / "audit.json");
        REQUIRE(cmd_audit({}, dir / "c", opts) == ExitStatus::Ok);
        const json replay = json::parse(slurp(dir / "c" / "audit.json"));
        REQUIRE(replay["records"].size() == audit["records"].size());
        for (std::size_t i = 0; i < audit["records"].size(); ++i) {
            const auto& x = audit["records"][i];
            const auto& y = replay["records"][i];
            CAPTURE(x["name"]);
            CHECK(x["name"] == y["name"]);
            CHECK(x["verdict"] == y["verdict"]);
            const double a = x["lhs"].get<double>(), b = y["lhs"].get<double>();
            CHECK(std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("cmd_run: failures map onto exit statuses and leave no files") {
    const fs::path dir = scratch("fail");
    const fs::path cfg = write_file(dir / "decay.ini", kDecayConfig);
    std::ostringstream out, err;
    CliOptions opts;
    opts.out = &out;
    opts.err = &err;

    SUBCASE("output directory below a regular file") {
        write_file(dir / "plain", "x");
        CHECK(cmd_run(cfg, dir / "plain" / "out", opts) == ExitStatus::Io);
        CHECK(fs::is_regular_file(dir / "plain"));
        CHECK(err.str().find("I/O error") != std::string::npos);
    }
    SUBCASE("missing config") {
        CHECK(cmd_run(dir / "absent.ini", dir / "out", opts) == ExitStatus::Io);
        CHECK_FALSE(fs::exists(dir / "out"));
    }
    SUBCASE("config error") {
        const fs::path bad = write_file(dir / "bad.ini", "[model]\nd = 3\neta = 2\n");
        CHECK(cmd_run(bad, dir / "out", opts) == ExitStatus::Config);
        CHECK(err.str().find("Cond1") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "out"));
    }
    SUBCASE("solver abort") {
        const fs::path abort = write_file(dir / "abort.ini", kDecayConfig + "[integrator]\nmax_steps = 1\n");
        CHECK(cmd_run(abort, dir / "out", opts) == ExitStatus::SolverAbort);
        CHECK(!err.str().empty());
        CHECK((!fs::exists(dir / "out") || fs::is_empty(dir / "out")));
    }
}

TEST_CASE("cmd_sweep: partial failure is reported with exit 3") {
    const fs::path dir = scratch("sweep");
    const fs::path cfg = write_file(dir / "sweep.ini",
                                    "[model]\nT_final = 0.1\n[domain]\nN = 8\n[truncation]\nl = 4\n"
                                    "[initial]\nmollify = false\n[output]\nuniform_intervals = 32\n"
                                    "geometric_levels = 4\n[sweep]\naxis = j\nlevels = 4, 8, 64\n");
    std::ostringstream out, err;
    CliOptions opts;
    opts.json = true;
    opts.jobs = 2;
    opts.out = &out;
    opts.err = &err;
    REQUIRE(cmd_sweep(cfg, dir / "out", opts) == ExitStatus::PartialSweep);
    const json rep = json::parse(out.str());
    CHECK(rep == json::parse(slurp(dir / "out" / "sweep.json")));
    REQUIRE(rep["results"].size() == 3);
    CHECK(rep["results"][0]["ok"] == true);
    CHECK(rep["results"][2]["ok"] == false);
    CHECK(fs::is_regular_file(dir / "out" / "j_4" / "trajectory.tkef"));
    CHECK(fs::is_regular_file(dir / "out" / "j_8" / "audit.json"));
    CHECK_FALSE(fs::exists(dir / "out" / "j_64"));

    const fs::path nosweep = write_file(dir / "plain.ini", "[model]\nT_final = 0.1\n");
    CHECK(cmd_sweep(nosweep, dir / "out2", opts) == ExitStatus::Config);
}

TEST_CASE("cmd_exponents: JSON carries exact exponents and conditions") {
    ModelParameters p;
    p.d = 3;
    p.alpha = 2.0;
    p.beta = 1.0;
    p.gamma = 0.3;
    const json j = json::parse(exponents_json(p));
    for (const char* key : {"parameters", "exponents", "admissibility"}) CHECK(j.contains(key));
    const auto& e = j["exponents"];
    for (const char* key : {"r_u", "rho_k", "r_k", "sigma0", "rho1", "rho2", "rho3", "rho4", "rho5", "rho0",
                            "rho0_reduced", "q_gradient"}) {
        CAPTURE(key);
        REQUIRE(e.contains(key));
        CHECK(e[key]["exact"].is_string());
        CHECK(e[key]["value"].is_number());
        CHECK(e[key]["is_exact"].is_boolean());
    }
    CHECK(e["r_u"]["exact"] == "10/3");
    CHECK(e["r_k"]["exact"] == "5/3");
    CHECK(e["sigma0"]["exact"] == "5/3");
    CHECK(e["rho0"]["exact"] == "10/9");
    CHECK(j["admissibility"]["admissible"] == true);
    CHECK(j["admissibility"]["first_violation"] == "");
    REQUIRE(j["admissibility"]["conditions"].size() == 3);
    for (const auto& c : j["admissibility"]["conditions"]) CHECK(c["satisfied"] == true);

    p = ModelParameters{};
    CHECK(json::parse(exponents_json(p))["exponents"]["r_u"]["exact"] == "4");
    p.d = 3;
    p.alpha = 4.0;
    CHECK(json::parse(exponents_json(p))["exponents"]["r_u"]["exact"] == "4");

    std::ostringstream out, err;
    CliOptions opts;
    opts.out = &out;
    opts.err = &err;
    p.alpha = 0.5;
    CHECK(cmd_exponents(p, opts) == ExitStatus::Config);
}

TEST_CASE("command-line binary: exit statuses and JSON on standard output") {
    const std::string bin = TURBKEPS_CLI;
    const fs::path dir = scratch("binary");
    fs::create_directories(dir);
    const fs::path cfg = write_file(dir / "decay.ini", kDecayConfig);
    const std::string q = " 2>" + (dir / "stderr.txt").string();

    CHECK(shell(bin + " exponents --d 3 --alpha 2 --gamma 0.3 --json >" + (dir / "exp.json").string() + q) == 0);
    const json e = json::parse(slurp(dir / "exp.json"));
    CHECK(e["exponents"]["rho0"]["exact"] == "10/9");
    CHECK(shell(bin + " exponents --d 3 --alpha 2 >" + (dir / "exp.txt").string() + q) == 0);
    CHECK(slurp(dir / "exp.txt").find("admissible: yes") != std::string::npos);
    CHECK(shell(bin + " exponents --bogus >/dev/null" + q) == 1);
    CHECK(shell(bin + " >/dev/null" + q) == 1);

    CHECK(shell(bin + " run --config " + cfg.string() + " --out " + (dir / "out").string() + " --json >" +
                (dir / "run.json").string() + q) == 0);
    CHECK(json::parse(slurp(dir / "run.json"))["stats"]["positivity_events"] == 0);
    CHECK(shell(bin + " audit --out " + (dir / "out").string() + " --json >" + (dir / "audit.json").string() + q) == 0);
    CHECK(json::parse(slurp(dir / "audit.json"))["records"].size() > 10);

    write_file(dir / "plain", "x");
    CHECK(shell(bin + " run --config " + cfg.string() + " --out " + (dir / "plain" / "x").string() + " >/dev/null" +
                q) == 2);
    const fs::path bad = write_file(dir / "bad.ini", "[model]\nd = 3\neta = 2\n");
    CHECK(shell(bin + " run --config " + bad.string() + " --out " + (dir / "bad").string() + " >/dev/null" + q) == 1);
    CHECK(shell(bin + " run --override-admissibility --config " + bad.string() + " --out " + (dir / "bad").string() +
                " >/dev/null" + q) == 1);  // accepted by the parser, then d = 3 is rejected by the solver
    CHECK(slurp(dir / "stderr.txt").find("d = 2") != std::string::npos);
}
