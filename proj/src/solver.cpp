#include "turbkeps/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include <spdlog/spdlog.h>

#include "turbkeps/errors.hpp"
#include "turbkeps/exponents.hpp"
#include "turbkeps/field_io.hpp"

namespace turbkeps {

namespace {

using Eigen::ArrayXd;
using Eigen::VectorXd;

std::string fmt_time(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", t);
    return buf;
}

// Nodal coefficient values; constant laws skip the pow.
ArrayXd law_values(const CoefficientLaw& law, int n, const ArrayXd& k, bool truncated) {
    if (law.exponent == 0.0 && !law.multiplier && law.kind != LawKind::TurbDissipation)
        return ArrayXd::Constant(k.size(), law.scale);
    ArrayXd out(k.size());
    for (Eigen::Index i = 0; i < k.size(); ++i)
        out(i) = truncated ? truncated_coefficient(law, n, k(i)) : eval_coefficient(law, k(i));
    return out;
}

}  // namespace

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Truncation: return "n";
        case SweepAxis::J: return "j";
        case SweepAxis::L: return "l";
    }
    return "?";
}

void RunConfig::validate() const {
    params.validate();
    spec.validate();
    integrator.validate();
    if (n < 1) throw Error(ErrorKind::Config, "truncation level n must be >= 1");
    if (j < 1 || l < 1) throw Error(ErrorKind::Config, "j and l must be >= 1");
    if (output.uniform_intervals < 2 || output.uniform_intervals % 2 != 0)
        throw Error(ErrorKind::Config, "output.uniform_intervals must be even and >= 2");
    if (output.geometric_levels < 0 || output.geometric_levels > 60)
        throw Error(ErrorKind::Config, "output.geometric_levels must lie in [0, 60]");
    for (double t : output.extra_times)
        if (!(t >= 0.0 && t <= params.T_final))
            throw Error(ErrorKind::Config, "sample time " + fmt_time(t) + " outside [0, T_final]");
    if (forcing.kind == Forcing::Kind::Mode && (forcing.mode < 0 || forcing.mode >= j))
        throw Error(ErrorKind::Config, "forcing mode index out of range");
    if (initial.u0 == InitialSpec::Velocity::Mode && (initial.u0_mode < 0 || initial.u0_mode >= j))
        throw Error(ErrorKind::Config, "initial velocity mode index out of range");
    if (sweep) {
        if (sweep->levels.size() < 3)
            throw Error(ErrorKind::Config, "a sweep needs at least 3 levels");
        for (std::size_t i = 0; i < sweep->levels.size(); ++i) {
            if (sweep->levels[i] < 1) throw Error(ErrorKind::Config, "sweep levels must be positive");
            if (i > 0 && sweep->levels[i] <= sweep->levels[i - 1])
                throw Error(ErrorKind::Config, "sweep levels must be strictly increasing");
        }
    }
}

std::vector<double> sample_times(const RunConfig& cfg) {
    const double T = cfg.params.T_final;
    std::vector<double> out;
    const int U = cfg.output.uniform_intervals;
    for (int i = 0; i <= U; ++i) out.push_back(T * (static_cast<double>(i) / U));
    for (int m = 1; m <= cfg.output.geometric_levels; ++m) out.push_back(T * std::ldexp(1.0, -m));
    out.insert(out.end(), cfg.output.extra_times.begin(), cfg.output.extra_times.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct GalerkinSystem::Nodal {
    ArrayXd ux, uy, dxux, dyux, dxuy, dyuy;
    ArrayXd k, kx, ky;
    ArrayXd kc;  ///< k used in coefficients and dissipation (>= 0)
    ArrayXd kt;  ///< k used in transport
    ArrayXd u2, phi, nuT, nuD, nuP, eps, D2, Dxy;
};

GalerkinSystem::GalerkinSystem(const RunConfig& cfg, const Basis& basis)
    : cfg_(cfg),
      basis_(basis),
      nu_T_(viscosity_law(cfg.params)),
      nu_D_(diffusion_law(cfg.params)),
      nu_P_(production_law(cfg.params)),
      eps_(dissipation_law(cfg.params)) {
    if (basis.j() != cfg.j || basis.l() != cfg.l || !(basis.spec == cfg.spec))
        throw Error(ErrorKind::Usage, "basis does not match the run configuration");
    const auto nodes = static_cast<Eigen::Index>(basis.assembly.grid.size());
    gx_ = VectorXd::Zero(nodes);
    gy_ = VectorXd::Zero(nodes);
    switch (cfg.forcing.kind) {
        case Forcing::Kind::Zero:
            break;
        case Forcing::Kind::Constant:
            gx_.setConstant(cfg.forcing.vector[0]);
            gy_.setConstant(cfg.forcing.vector[1]);
            break;
        case Forcing::Kind::Mode:
            if (cfg.forcing.mode < 0 || cfg.forcing.mode >= basis.j())
                throw Error(ErrorKind::Config, "forcing mode index out of range");
            gx_ = cfg.forcing.amplitude * basis.assembly.vel.vx.col(cfg.forcing.mode);
            gy_ = cfg.forcing.amplitude * basis.assembly.vel.vy.col(cfg.forcing.mode);
            break;
    }
}

GalerkinSystem::Nodal GalerkinSystem::nodal(const VectorXd& a, const VectorXd& c) const {
    const auto& V = basis_.assembly.vel;
    const auto& S = basis_.assembly.tke;
    Nodal f;
    f.ux = (V.vx * a).array();
    f.uy = (V.vy * a).array();
    f.dxux = (V.dxvx * a).array();
    f.dyux = (V.dyvx * a).array();
    f.dxuy = (V.dxvy * a).array();
    f.dyuy = (V.dyvy * a).array();
    f.k = (S.w * c).array();
    f.kx = (S.dxw * c).array();
    f.ky = (S.dyw * c).array();
    f.kc = f.k.max(0.0);
    f.kt = cfg_.positivity == PositivityPolicy::Floor ? f.kc : f.k;
    f.u2 = f.ux.square() + f.uy.square();
    const Eigen::Index nodes = f.u2.size();
    f.phi = ArrayXd::Ones(nodes);
    if (cfg_.apply_cutoff)
        for (Eigen::Index i = 0; i < nodes; ++i)
            if (f.u2(i) > cfg_.n) f.phi(i) = cutoff(cfg_.n, f.u2(i));
    // k enters the coefficients only through max(k, 0); non-finite trial
    // values must not reach the domain checks of the laws.
    if (!f.kc.allFinite()) f.kc = f.kc.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
    f.nuT = law_values(nu_T_, cfg_.n, f.kc, true);
    f.nuD = law_values(nu_D_, cfg_.n, f.kc, true);
    f.nuP = law_values(nu_P_, cfg_.n, f.kc, true);
    f.eps = law_values(eps_, cfg_.n, f.kc, false);
    if (!f.k.allFinite()) f.eps = ArrayXd::Constant(nodes, std::numeric_limits<double>::quiet_NaN());
    f.Dxy = 0.5 * (f.dyux + f.dxuy);
    f.D2 = f.dxux.square() + f.dyuy.square() + 2.0 * f.Dxy.square();
    return f;
}

VectorXd GalerkinSystem::velocity_rhs(const Nodal& f, bool convective_only) const {
    const auto& V = basis_.assembly.vel;
    const double w = basis_.assembly.grid.weight;
    ArrayXd Sxx = f.phi * f.ux * f.ux;
    ArrayXd Syy = f.phi * f.uy * f.uy;
    ArrayXd Sxy = f.phi * f.ux * f.uy;
    if (!convective_only) {
        Sxx -= f.nuT * f.dxux;
        Syy -= f.nuT * f.dyuy;
        Sxy -= f.nuT * f.Dxy;
    }
    VectorXd out = V.dxvx.transpose() * Sxx.matrix() + V.dyvx.transpose() * Sxy.matrix() +
                   V.dxvy.transpose() * Sxy.matrix() + V.dyvy.transpose() * Syy.matrix();
    if (!convective_only) {
        const double cDa = cfg_.params.cDa, cFo = cfg_.params.cFo, alpha = cfg_.params.alpha;
        ArrayXd drag(f.u2.size());
        for (Eigen::Index i = 0; i < drag.size(); ++i) {
            // |u|^(alpha-2) u vanishes at u = 0 for alpha > 1
            drag(i) = f.u2(i) > 0.0 ? cDa + cFo * std::pow(f.u2(i), 0.5 * (alpha - 2.0)) : cDa;
        }
        const ArrayXd fx = gx_.array() - drag * f.ux;
        const ArrayXd fy = gy_.array() - drag * f.uy;
        out += V.vx.transpose() * fx.matrix() + V.vy.transpose() * fy.matrix();
    }
    return w * out;
}

TkeTerms GalerkinSystem::tke_terms(const Nodal& f) const {
    const auto& S = basis_.assembly.tke;
    const double w = basis_.assembly.grid.weight;
    TkeTerms t;
    t.transport = w * (S.dxw.transpose() * (f.kt * f.ux).matrix() + S.dyw.transpose() * (f.kt * f.uy).matrix());
    t.diffusion = -w * (S.dxw.transpose() * (f.nuD * f.kx).matrix() + S.dyw.transpose() * (f.nuD * f.ky).matrix());
    t.dissipation = -w * (S.w.transpose() * f.eps.matrix());
    t.generation = w * (S.w.transpose() * (f.nuT * f.D2).matrix());
    const double beta = cfg_.params.beta;
    const ArrayXd ub = f.u2.unaryExpr([beta](double v) { return std::pow(v, 0.5 * beta); });
    t.production = w * (S.w.transpose() * (f.nuP * ub).matrix());
    return t;
}

VectorXd GalerkinSystem::velocity_rhs(const GalerkinState& s) const {
    return velocity_rhs(nodal(s.a, s.c), false);
}

VectorXd GalerkinSystem::convective_rhs(const GalerkinState& s) const {
    return velocity_rhs(nodal(s.a, s.c), true);
}

TkeTerms GalerkinSystem::tke_terms(const GalerkinState& s) const { return tke_terms(nodal(s.a, s.c)); }

VectorXd GalerkinSystem::tke_rhs(const GalerkinState& s) const { return tke_terms(s).total(); }

EnergyBudget GalerkinSystem::energy_budget(const GalerkinState& s) const {
    const Nodal f = nodal(s.a, s.c);
    const double w = basis_.assembly.grid.weight;
    EnergyBudget b;
    b.energy = 0.5 * s.a.squaredNorm();
    b.dissipation = w * (f.nuT * f.D2).sum();
    b.darcy = cfg_.params.cDa * w * f.u2.sum();
    const double alpha = cfg_.params.alpha;
    b.forchheimer = cfg_.params.cFo * w * f.u2.unaryExpr([alpha](double v) { return std::pow(v, 0.5 * alpha); }).sum();
    b.forcing = w * (gx_.array() * f.ux + gy_.array() * f.uy).sum();
    b.convective = s.a.dot(velocity_rhs(f, true));
    b.residual = s.a.dot(velocity_rhs(f, false)) + b.dissipation + b.darcy + b.forchheimer - b.forcing;
    return b;
}

void GalerkinSystem::rhs(const VectorXd& y, VectorXd& dy) const {
    const Eigen::Index j = basis_.j(), l = basis_.l();
    const VectorXd a = y.head(j), c = y.tail(l);
    const Nodal f = nodal(a, c);
    dy.resize(j + l);
    dy.head(j) = velocity_rhs(f, false);
    dy.tail(l) = tke_terms(f).total();
}

std::pair<double, double> GalerkinSystem::negativity(const VectorXd& c) const {
    const ArrayXd k = (basis_.assembly.tke.w * c).array();
    return {k.minCoeff(), basis_.assembly.grid.weight * (-k).max(0.0).sum()};
}

namespace {

void require_finite(const GalerkinState& s) {
    if (!s.a.allFinite() || !s.c.allFinite())
        throw Error(ErrorKind::SolverAbort, "non-finite state at t=" + fmt_time(s.t));
}

}  // namespace

VectorXd assemble_velocity_rhs(const GalerkinState& s, const RunConfig& cfg, const Basis& basis) {
    require_finite(s);
    const VectorXd out = GalerkinSystem(cfg, basis).velocity_rhs(s);
    if (!out.allFinite())
        throw Error(ErrorKind::SolverAbort, "non-finite velocity right-hand side at t=" + fmt_time(s.t));
    return out;
}

VectorXd assemble_tke_rhs(const GalerkinState& s, const RunConfig& cfg, const Basis& basis) {
    require_finite(s);
    const VectorXd out = GalerkinSystem(cfg, basis).tke_rhs(s);
    if (!out.allFinite())
        throw Error(ErrorKind::SolverAbort, "non-finite TKE right-hand side at t=" + fmt_time(s.t));
    return out;
}

StepResult step(const GalerkinState& s, double dt, const RunConfig& cfg, const Basis& basis) {
    require_finite(s);
    const GalerkinSystem sys(cfg, basis);
    const Eigen::Index j = basis.j(), l = basis.l();
    VectorXd y(j + l);
    y << s.a, s.c;
    Dopri5 integ([&sys](double, const VectorXd& yy, VectorXd& dy) { sys.rhs(yy, dy); }, cfg.integrator);
    integ.reset(s.t, y, dt);
    StepResult r;
    r.accepted = integ.attempt(std::max(cfg.params.T_final, s.t + dt));
    r.dt_next = integ.h_next();
    r.local_error = integ.last_error();
    r.state.t = integ.t();
    r.state.a = integ.y().head(j);
    r.state.c = integ.y().tail(l);
    return r;
}

GalerkinState initial_state(const RunConfig& cfg, const Basis& basis, RunStats* stats) {
    GalerkinState s;
    s.a = VectorXd::Zero(basis.j());
    switch (cfg.initial.u0) {
        case InitialSpec::Velocity::Zero:
            break;
        case InitialSpec::Velocity::Mode:
            if (cfg.initial.u0_mode < 0 || cfg.initial.u0_mode >= basis.j())
                throw Error(ErrorKind::Config, "initial velocity mode index out of range");
            s.a(cfg.initial.u0_mode) = cfg.initial.u0_amplitude;
            break;
        case InitialSpec::Velocity::File: {
            const auto recs = read_tkef_file(cfg.initial.u0_file);
            if (recs.empty()) throw Error(ErrorKind::Data, cfg.initial.u0_file + " holds no records");
            DiscreteField f = from_record(recs.front(), cfg.spec);
            if (f.components != 2) throw Error(ErrorKind::Data, cfg.initial.u0_file + " is not a velocity field");
            s.a = project(f, basis, Family::Velocity);
            break;
        }
    }

    DiscreteField k0(cfg.spec, 1);
    const Grid g = base_grid(cfg.spec);
    switch (cfg.initial.k0) {
        case InitialSpec::Tke::Constant:
            std::fill(k0.values.begin(), k0.values.end(), cfg.initial.k0_value);
            break;
        case InitialSpec::Tke::Cosine:
            for (std::size_t i = 0; i < g.size(); ++i)
                k0.at(i) = cfg.initial.k0_value +
                           cfg.initial.k0_amplitude *
                               std::cos(2.0 * std::numbers::pi * g.node(i)[0] / cfg.spec.extent[0]);
            break;
        case InitialSpec::Tke::File:
            k0 = load_scalar_field(cfg.initial.k0_file, cfg.spec);
            break;
    }
    const double C0 = cfg.params.C0;
    const bool below = std::any_of(k0.values.begin(), k0.values.end(), [C0](double v) { return v < C0; });
    if (below) spdlog::warn("initial TKE falls below C0 = {}", C0);
    if (stats) stats->k0_below_C0 = below;
    if (cfg.initial.mollify) {
        auto m = mollify_k0(k0, cfg.n, C0);
        if (m.under_resolved) spdlog::warn("mollifier radius 1/{} is under-resolved on this grid", cfg.n);
        if (stats) stats->mollifier_under_resolved = m.under_resolved;
        k0 = std::move(m.field);
    }
    s.c = project(k0, basis, Family::Tke);
    return s;
}

Trajectory run(const RunConfig& cfg) {
    cfg.validate();
    const Basis basis = build_basis(cfg.spec, cfg.j, cfg.l);
    return run(cfg, basis);
}

Trajectory run(const RunConfig& cfg, const Basis& basis) {
    cfg.validate();
    if (cfg.params.d != 2)
        throw Error(ErrorKind::Config, "the solver implements d = 2 only (d = " + std::to_string(cfg.params.d) + ")");
    Trajectory traj;
    const auto adm = check_admissibility(cfg.params);
    if (!adm.admissible()) {
        const std::string which = adm.first_violation();
        const int idx = which == "Cond1" ? 0 : which == "Cond2" ? 1 : 2;
        const std::string msg = "parameters violate " + which + " (margin " + adm.margins[idx].str() + ")";
        if (!cfg.override_admissibility) throw Error(ErrorKind::Config, msg);
        spdlog::warn("{}; continuing under override", msg);
        traj.stats.admissibility_overridden = true;
    }

    const GalerkinSystem sys(cfg, basis);
    GalerkinState s0 = initial_state(cfg, basis, &traj.stats);
    require_finite(s0);
    const Eigen::Index j = basis.j(), l = basis.l();
    VectorXd y0(j + l);
    y0 << s0.a, s0.c;

    const double T = cfg.params.T_final;
    const auto times = sample_times(cfg);
    Dopri5 integ([&sys](double, const VectorXd& y, VectorXd& dy) { sys.rhs(y, dy); }, cfg.integrator);
    integ.reset(0.0, y0);

    auto split = [j, l](double t, const VectorXd& y) {
        return GalerkinState{t, y.head(j), y.tail(l)};
    };
    traj.states.push_back(s0);
    std::size_t next = 1;
    long attempts = 0;
    while (integ.t() < T) {
        if (++attempts > cfg.integrator.max_steps)
            throw Error(ErrorKind::SolverAbort, "step budget exhausted at t=" + fmt_time(integ.t()));
        if (!integ.attempt(T)) {
            if (integ.h_next() < 1e-14 * T)
                throw Error(ErrorKind::SolverAbort,
                            "step size underflow (dt=" + fmt_time(integ.h_next()) + ") at t=" +
                                fmt_time(integ.t()) + ", last error norm " + fmt_time(integ.last_error()));
            continue;
        }
        const GalerkinState cur = split(integ.t(), integ.y());
        const auto [min_k, floored] = sys.negativity(cur.c);
        if (min_k < 0.0) {
            ++traj.stats.positivity_events;
            if (cfg.positivity == PositivityPolicy::Floor)
                traj.stats.max_floored_mass = std::max(traj.stats.max_floored_mass, floored);
        }
        traj.steps.push_back({cur.t, integ.last_h(), integ.last_error(), min_k, sys.energy_budget(cur).residual});
        while (next < times.size() && times[next] <= integ.t()) {
            const double ts = times[next];
            traj.states.push_back(ts == integ.t() ? cur : split(ts, integ.interpolate(ts)));
            ++next;
        }
        spdlog::debug("t={} dt={} err={}", cur.t, integ.last_h(), integ.last_error());
    }
    traj.stats.accepted = integ.accepted();
    traj.stats.rejected = integ.rejected();
    traj.stats.rhs_evaluations = integ.rhs_evaluations();
    return traj;
}

void write_diagnostics_csv(std::ostream& out, const Trajectory& traj) {
    out << "t,dt,local_error,min_k,energy_residual\n";
    char buf[256];
    for (const auto& d : traj.steps) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", d.t, d.dt, d.local_error, d.min_k,
                      d.energy_residual);
        out << buf;
    }
}

DiscreteField state_field(const GalerkinState& s, const Basis& basis) {
    const DiscreteField u = evaluate(s.a, basis, Family::Velocity);
    const DiscreteField k = evaluate(s.c, basis, Family::Tke);
    DiscreteField out(basis.spec, 3);
    for (std::size_t i = 0; i < out.nodes(); ++i) {
        out.at(i, 0) = u.at(i, 0);
        out.at(i, 1) = u.at(i, 1);
        out.at(i, 2) = k.at(i);
    }
    return out;
}

GalerkinState state_from_field(const DiscreteField& f, double t, const Basis& basis) {
    if (f.components != 3) throw Error(ErrorKind::Data, "state records carry 3 components");
    DiscreteField u(basis.spec, 2), k(basis.spec, 1);
    for (std::size_t i = 0; i < f.nodes(); ++i) {
        u.at(i, 0) = f.at(i, 0);
        u.at(i, 1) = f.at(i, 1);
        k.at(i) = f.at(i, 2);
    }
    return {t, project(u, basis, Family::Velocity), project(k, basis, Family::Tke)};
}

}  // namespace turbkeps
