#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "turbkeps/errors.hpp"
#include "turbkeps/integrator.hpp"
#include "turbkeps/solver.hpp"

using namespace turbkeps;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;

RunConfig decay_config(double theta) {
    RunConfig cfg;
    cfg.spec = {DomainMode::PeriodicTorus2D, {1.0, 1.0}, 8};
    cfg.j = 4;
    cfg.l = 4;
    cfg.params.theta = theta;
    // theta = 1 needs zeta > 0 for theta < zeta + 2/d; diffusion of a
    // spatially constant k vanishes, so zeta does not enter the oracle
    cfg.params.zeta = 0.5;
    cfg.params.cEps = cfg.params.CEps = 1.0;
    cfg.params.T_final = 1.0;
    cfg.initial.k0 = InitialSpec::Tke::Constant;
    cfg.initial.k0_value = 1.0;
    cfg.integrator.rel_tol = 1e-10;
    cfg.integrator.abs_tol = 1e-14;
    return cfg;
}

int mode_index(const Basis& b, int m, int n, int kind) {
    for (int i = 0; i < b.j(); ++i) {
        const auto& d = b.velocity_modes[i];
        if (d.index[0] == m && d.index[1] == n && d.kind == kind) return i;
    }
    return -1;
}

GalerkinState state(const Basis& b) {
    return {0.0, VectorXd::Zero(b.j()), VectorXd::Zero(b.l())};
}

}  // namespace

TEST_CASE("Dopri5 solves linear problems to tolerance with dense output") {
    IntegratorSettings s;
    s.rel_tol = 1e-9;
    s.abs_tol = 1e-12;
    s.max_dt = 0.5;
    // harmonic oscillator y'' = -y
    Dopri5 integ([](double, const VectorXd& y, VectorXd& dy) {
        dy.resize(2);
        dy << y(1), -y(0);
    }, s);
    VectorXd y0(2);
    y0 << 1.0, 0.0;
    integ.reset(0.0, y0);
    double worst_dense = 0.0;
    while (integ.t() < 10.0) {
        if (!integ.attempt(10.0)) continue;
        for (int q = 1; q < 8; ++q) {
            const double t = integ.t_old() + q * (integ.t() - integ.t_old()) / 8;
            worst_dense = std::max(worst_dense, std::abs(integ.interpolate(t)(0) - std::cos(t)));
        }
        CHECK((integ.interpolate(integ.t()) - integ.y()).cwiseAbs().maxCoeff() <= 1e-15);
    }
    CHECK(integ.t() == 10.0);
    CHECK(std::abs(integ.y()(0) - std::cos(10.0)) <= 1e-7);
    CHECK(worst_dense <= 1e-7);

    // growth y' = y: the controller approaches the tolerance from below
    Dopri5 grow([](double, const VectorXd& y, VectorXd& dy) { dy = y; }, s);
    grow.reset(0.0, VectorXd::Ones(1));
    while (grow.t() < 1.0) grow.attempt(1.0);
    CHECK(grow.y()(0) == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
}

TEST_CASE("Dopri5 rejects steps whose stages overflow") {
    IntegratorSettings s;
    s.dt_init = 1.0;
    s.max_dt = 1.0;
    // y' = y^2 from y = 1 blows up at t = 1; a unit trial step overflows
    Dopri5 integ([](double, const VectorXd& y, VectorXd& dy) { dy = y.array().square().matrix() * 1e200; }, s);
    integ.reset(0.0, VectorXd::Ones(1));
    CHECK_FALSE(integ.attempt(1.0));
    CHECK(integ.rejected() == 1);
    CHECK(integ.h_next() < 1.0);
}

TEST_CASE("velocity right-hand side examples") {
    RunConfig cfg;
    cfg.spec = {DomainMode::PeriodicTorus2D, {1.0, 1.0}, 16};
    cfg.j = 8;
    cfg.l = 4;
    const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
    auto s = state(b);
    s.c(0) = 1.0;
    CHECK(assemble_velocity_rhs(s, cfg, b).isZero(0.0));

    cfg.forcing.kind = Forcing::Kind::Mode;
    cfg.forcing.mode = 0;
    cfg.forcing.amplitude = 1.0;
    const VectorXd e = assemble_velocity_rhs(s, cfg, b);
    CHECK(std::abs(e(0) - 1.0) <= 1e-13);
    CHECK(e.tail(cfg.j - 1).cwiseAbs().maxCoeff() <= 1e-13);

    // constant forcing has no mean-free component
    cfg.forcing = {Forcing::Kind::Constant, {0.3, -0.2}, 0, 0.0};
    CHECK(assemble_velocity_rhs(s, cfg, b).cwiseAbs().maxCoeff() <= 1e-14);

    s.c(0) = std::nan("");
    CHECK_THROWS_AS(assemble_velocity_rhs(s, cfg, b), Error);
}

TEST_CASE("single Fourier mode: viscous decay coefficient") {
    // With D(u) the symmetric gradient, int D(u):D(v) = 1/2 int grad u : grad v
    // for solenoidal periodic fields, so one mode decays at
    // -1/2 cT (1+kbar)^eta |kappa|^2.
    for (double eta : {0.0, 0.5, 1.3}) {
        RunConfig cfg;
        cfg.spec = {DomainMode::PeriodicTorus2D, {1.0, 2.0}, 16};
        cfg.j = 10;
        cfg.l = 3;
        cfg.params.eta = eta;
        cfg.params.cT = 0.7;
        cfg.params.CT = 0.7;
        cfg.params.cDa = cfg.params.cFo = 0.0;
        cfg.n = 8;
        const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
        for (int i = 0; i < b.j(); ++i) {
            auto s = state(b);
            const double kbar = 1.5;
            s.c(0) = kbar * std::sqrt(cfg.spec.area());
            s.a(i) = 0.01;
            const VectorXd r = assemble_velocity_rhs(s, cfg, b);
            const auto& m = b.velocity_modes[i];
            const double kx = 2 * kPi * m.index[0] / 1.0, ky = 2 * kPi * m.index[1] / 2.0;
            const double expect = -0.5 * 0.7 * std::pow(1 + kbar, eta) * (kx * kx + ky * ky) * 0.01;
            CHECK(r(i) == doctest::Approx(expect).epsilon(1e-12));
            for (int q = 0; q < b.j(); ++q)
                if (q != i) CHECK(std::abs(r(q)) <= 1e-14);
        }
    }
}

TEST_CASE("TKE right-hand side examples") {
    RunConfig cfg;
    cfg.spec = {DomainMode::PeriodicTorus2D, {2.0, 1.0}, 16};
    cfg.j = 6;
    cfg.l = 7;
    cfg.params.theta = 0.5;
    cfg.params.cEps = 1.3;
    cfg.params.CEps = 1.3;
    const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
    auto s = state(b);
    CHECK(assemble_tke_rhs(s, cfg, b).isZero(0.0));

    const double kbar = 2.0, sq = std::sqrt(cfg.spec.area());
    s.c(0) = kbar * sq;
    VectorXd r = assemble_tke_rhs(s, cfg, b);
    CHECK(r(0) == doctest::Approx(-1.3 * std::pow(kbar, 1.5) * sq).epsilon(1e-13));
    CHECK(r.tail(cfg.l - 1).cwiseAbs().maxCoeff() <= 1e-13);

    // production and generation from a single velocity mode
    cfg.params.beta = 2.0;
    cfg.params.gamma = 0.0;
    cfg.params.cP = cfg.params.CP = 0.4;
    cfg.params.eta = 0.5;
    cfg.params.cT = cfg.params.CT = 0.9;
    cfg.params.cEps = cfg.params.CEps = 1.0;
    cfg.n = 8;
    const int i = 2;
    const double amp = 0.3;
    s.a(i) = amp;
    const GalerkinSystem sys(cfg, b);
    const TkeTerms t = sys.tke_terms(s);
    const auto& m = b.velocity_modes[i];
    const double kx = 2 * kPi * m.index[0] / 2.0, ky = 2 * kPi * m.index[1] / 1.0;
    const double normD2 = 0.5 * (kx * kx + ky * ky) * amp * amp;
    CHECK(t.production(0) == doctest::Approx(0.4 * amp * amp / sq).epsilon(1e-12));
    CHECK(t.generation(0) == doctest::Approx(0.9 * std::pow(1 + kbar, 0.5) * normD2 / sq).epsilon(1e-12));
    CHECK(std::abs(t.transport(0)) <= 1e-14);  // constant test function
    CHECK(std::abs(t.diffusion(0)) <= 1e-14);
    CHECK((t.total() - sys.tke_rhs(s)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("convective term is energy-neutral on the torus") {
    RunConfig cfg;
    cfg.spec = {DomainMode::PeriodicTorus2D, {1.0, 1.0}, 16};
    cfg.j = 24;
    cfg.l = 8;
    cfg.n = 1000;
    const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
    const GalerkinSystem sys(cfg, b);
    std::mt19937_64 rng(41);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
        auto s = state(b);
        for (auto& v : s.a) v = nd(rng);
        for (auto& v : s.c) v = 0.1 * nd(rng);
        s.c(0) = 2.0;
        const VectorXd conv = sys.convective_rhs(s);
        CHECK(conv.norm() > 1e-3);  // the term itself is not trivial
        CHECK(std::abs(s.a.dot(conv)) <= 1e-10 * conv.norm() * s.a.norm());
        const auto budget = sys.energy_budget(s);
        CHECK(std::abs(budget.residual) <= 1e-10 * (budget.dissipation + budget.darcy + budget.forchheimer));
    }
}

TEST_CASE("step: zero state is a fixed point and dt grows to max_dt") {
    RunConfig cfg = decay_config(0.0);
    cfg.initial.k0_value = 0.0;
    cfg.integrator.max_dt = 0.1;
    const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
    auto s = state(b);
    double dt = 1e-4;
    for (int i = 0; i < 8; ++i) {
        const auto r = step(s, dt, cfg, b);
        CHECK(r.accepted);
        CHECK(r.state.a.isZero(0.0));
        CHECK(r.state.c.isZero(0.0));
        s = r.state;
        dt = r.dt_next;
    }
    CHECK(dt == 0.1);
}

TEST_CASE("scalar decay oracles") {
    {
        const RunConfig cfg = decay_config(0.0);
        const Trajectory tr = run(cfg);
        const double sq = std::sqrt(cfg.spec.area());
        CHECK(tr.states.back().t == 1.0);
        CHECK(tr.states.back().c(0) / sq == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
        for (const auto& st : tr.states) {
            CHECK(st.c(0) / sq == doctest::Approx(std::exp(-st.t)).epsilon(1e-8));
            CHECK(st.a.isZero(0.0));
        }
        CHECK(tr.stats.positivity_events == 0);
    }
    {
        const RunConfig cfg = decay_config(1.0);
        const Trajectory tr = run(cfg);
        for (const auto& st : tr.states)
            CHECK(st.c(0) == doctest::Approx(1.0 / (1.0 + st.t)).epsilon(1e-8));
    }
}

TEST_CASE("single-mode run decays at the closed-form rate") {
    RunConfig cfg = decay_config(0.0);
    cfg.spec.N = 16;
    cfg.j = 8;
    cfg.l = 4;
    cfg.params.cDa = cfg.params.cFo = 0.0;
    cfg.params.T_final = 0.05;
    const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
    const int i = mode_index(b, 1, 0, 0);
    REQUIRE(i >= 0);
    cfg.initial.u0 = InitialSpec::Velocity::Mode;
    cfg.initial.u0_mode = i;
    cfg.initial.u0_amplitude = 1e-3;
    const Trajectory tr = run(cfg, b);
    const double rate = 0.5 * 4 * kPi * kPi;
    for (const auto& st : tr.states) CHECK(st.a(i) == doctest::Approx(1e-3 * std::exp(-rate * st.t)).epsilon(1e-7));
}

TEST_CASE("sample times") {
    RunConfig cfg;
    cfg.params.T_final = 2.0;
    cfg.output.extra_times = {0.3};
    const auto t = sample_times(cfg);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 2.0);
    CHECK(std::is_sorted(t.begin(), t.end()));
    CHECK(std::adjacent_find(t.begin(), t.end()) == t.end());
    CHECK(std::find(t.begin(), t.end(), 2.0 / 4096) != t.end());
    CHECK(std::find(t.begin(), t.end(), 0.3) != t.end());
    // 513 uniform + m = 10, 11, 12 (m <= 9 coincide with the grid) + 1 extra
    CHECK(t.size() == 513 + 3 + 1);
}

TEST_CASE("truncation and cutoff inactivity are bit-exact") {
    RunConfig cfg = decay_config(0.0);
    cfg.spec.N = 16;
    cfg.j = 10;
    cfg.l = 6;
    cfg.params.eta = 0.5;
    cfg.params.zeta = 0.3;
    cfg.params.gamma = 0.2;
    cfg.params.T_final = 0.2;
    cfg.initial.u0 = InitialSpec::Velocity::Mode;
    cfg.initial.u0_mode = 3;
    cfg.initial.u0_amplitude = 0.5;
    cfg.initial.k0 = InitialSpec::Tke::Cosine;
    cfg.initial.k0_value = 1.0;
    cfg.initial.k0_amplitude = 0.5;
    cfg.initial.mollify = false;  // the mollifier radius depends on n
    cfg.integrator.rel_tol = 1e-8;
    const Basis b = build_basis(cfg.spec, cfg.j, cfg.l);
    cfg.n = 4;
    const Trajectory t4 = run(cfg, b);
    for (int n : {8, 16}) {
        cfg.n = n;
        const Trajectory tn = run(cfg, b);
        REQUIRE(tn.states.size() == t4.states.size());
        for (std::size_t s = 0; s < tn.states.size(); ++s) {
            CHECK(tn.states[s].a == t4.states[s].a);
            CHECK(tn.states[s].c == t4.states[s].c);
        }
    }
    cfg.n = 4;
    cfg.apply_cutoff = false;
    const Trajectory uncut = run(cfg, b);
    for (std::size_t s = 0; s < uncut.states.size(); ++s) CHECK(uncut.states[s].a == t4.states[s].a);

    // the convective term itself, state by state
    GalerkinState probe = t4.states[3];
    cfg.apply_cutoff = true;
    const VectorXd cut = GalerkinSystem(cfg, b).convective_rhs(probe);
    cfg.apply_cutoff = false;
    CHECK(GalerkinSystem(cfg, b).convective_rhs(probe) == cut);
}

TEST_CASE("runs are deterministic") {
    RunConfig cfg = decay_config(0.5);
    cfg.spec.N = 16;
    cfg.j = 8;
    cfg.l = 8;
    cfg.params.T_final = 0.1;
    cfg.initial.u0 = InitialSpec::Velocity::Mode;
    cfg.initial.u0_mode = 1;
    cfg.initial.u0_amplitude = 0.4;
    cfg.initial.k0 = InitialSpec::Tke::Cosine;
    cfg.initial.k0_amplitude = 0.3;
    cfg.initial.k0_value = 1.5;
    const Trajectory a = run(cfg), b = run(cfg);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t s = 0; s < a.states.size(); ++s) {
        CHECK(a.states[s].a == b.states[s].a);
        CHECK(a.states[s].c == b.states[s].c);
    }
    std::ostringstream da, db;
    write_diagnostics_csv(da, a);
    write_diagnostics_csv(db, b);
    CHECK(da.str() == db.str());
    CHECK(da.str().rfind("t,dt,local_error,min_k,energy_residual\n", 0) == 0);
}

TEST_CASE("positivity policies") {
    RunConfig cfg = decay_config(0.0);
    cfg.spec.N = 16;
    cfg.j = 4;
    cfg.l = 9;
    cfg.params.T_final = 0.05;
    cfg.params.C0 = 0.05;
    cfg.initial.k0 = InitialSpec::Tke::Cosine;
    cfg.initial.k0_value = 0.1;
    cfg.initial.k0_amplitude = 0.5;
    cfg.initial.mollify = false;
    const Trajectory mon = run(cfg);
    CHECK(mon.stats.positivity_events > 0);
    CHECK(mon.steps.front().min_k < 0.0);
    CHECK(mon.stats.max_floored_mass == 0.0);
    cfg.positivity = PositivityPolicy::Floor;
    const Trajectory fl = run(cfg);
    CHECK(fl.stats.positivity_events > 0);
    CHECK(fl.stats.max_floored_mass > 0.0);
}

TEST_CASE("run preconditions and aborts") {
    RunConfig cfg = decay_config(0.0);
    cfg.params.d = 3;
    CHECK_THROWS_AS(run(cfg), Error);

    cfg = decay_config(0.0);
    cfg.params.gamma = 0.8;
    cfg.params.beta = 3.5;  // Cond3: 0.8 + 3.5/4 > 1
    try {
        run(cfg);
        FAIL("expected admissibility rejection");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("Cond3") != std::string::npos);
    }
    cfg.override_admissibility = true;
    cfg.params.T_final = 0.01;
    const Trajectory tr = run(cfg);
    CHECK(tr.stats.admissibility_overridden);

    cfg = decay_config(0.0);
    cfg.integrator.max_steps = 3;
    cfg.integrator.max_dt = 1e-3;
    try {
        run(cfg);
        FAIL("expected abort");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SolverAbort);
    }
}

TEST_CASE("state fields round trip through the base grid") {
    RunConfig cfg;
    cfg.spec = {DomainMode::PeriodicTorus2D, {1.0, 1.0}, 16};
    const Basis b = build_basis(cfg.spec, 12, 9);
    std::mt19937_64 rng(43);
    std::normal_distribution<double> nd;
    GalerkinState s{0.25, VectorXd(12), VectorXd(9)};
    for (auto& v : s.a) v = nd(rng);
    for (auto& v : s.c) v = nd(rng);
    const auto back = state_from_field(state_field(s, b), 0.25, b);
    CHECK((back.a - s.a).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.c - s.c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Dirichlet box runs and conserves energy up to discretization") {
    RunConfig cfg = decay_config(0.0);
    cfg.spec = {DomainMode::DirichletBox2D, {1.0, 1.0}, 12};
    cfg.j = 6;
    cfg.l = 6;
    cfg.params.T_final = 0.02;
    cfg.initial.u0 = InitialSpec::Velocity::Mode;
    cfg.initial.u0_mode = 0;
    cfg.initial.u0_amplitude = 0.5;
    const Trajectory tr = run(cfg);
    CHECK(tr.states.back().a(0) < 0.5);
    CHECK(tr.states.back().a(0) > 0.0);
}
