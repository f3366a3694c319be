#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "oracles.hpp"
#include "turbkeps/solver.hpp"

// Frozen-field fixture shared by the auditor tests and the acceptance gate.
namespace turbkeps::fixtures {

using Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline const double kRt2 = std::sqrt(2.0);

inline int velocity_index(const Basis& b, int m, int n, int kind) {
    for (int i = 0; i < b.j(); ++i) {
        const auto& d = b.velocity_modes[i];
        if (d.index[0] == m && d.index[1] == n && d.kind == kind) return i;
    }
    return -1;
}

inline int scalar_index(const Basis& b, int m, int n, int kind) {
    for (int i = 0; i < b.l(); ++i) {
        const auto& d = b.tke_modes[i];
        if (d.kind == kind && (kind == 2 || (d.index[0] == m && d.index[1] == n))) return i;
    }
    return -1;
}

// Analytic fixture on the unit torus:
//   u = (-a2 sqrt2 sin 2pi y, a1 sqrt2 cos 2pi x)
//   k = kbar + A sin 2pi x + B cos 2pi y
struct Fixture {
    double a1 = 0.8, a2 = 0.5, kbar = 0.5, A = 0.2, B = 0.1;

    double ux(double, double y) const { return -a2 * kRt2 * std::sin(2 * kPi * y); }
    double uy(double x, double) const { return a1 * kRt2 * std::cos(2 * kPi * x); }
    double dyux(double, double y) const { return -a2 * kRt2 * 2 * kPi * std::cos(2 * kPi * y); }
    double dxuy(double x, double) const { return -a1 * kRt2 * 2 * kPi * std::sin(2 * kPi * x); }
    double k(double x, double y) const { return kbar + A * std::sin(2 * kPi * x) + B * std::cos(2 * kPi * y); }
    double kx(double x, double) const { return 2 * kPi * A * std::cos(2 * kPi * x); }
    double ky(double, double y) const { return -2 * kPi * B * std::sin(2 * kPi * y); }
    double u_abs(double x, double y) const { return std::hypot(ux(x, y), uy(x, y)); }
    double grad_k(double x, double y) const { return std::hypot(kx(x, y), ky(x, y)); }

    GalerkinState state(const Basis& b) const {
        GalerkinState s{0.0, VectorXd::Zero(b.j()), VectorXd::Zero(b.l())};
        s.a(velocity_index(b, 1, 0, 0)) = a1;
        s.a(velocity_index(b, 0, 1, 1)) = a2;
        s.c(scalar_index(b, 0, 0, 2)) = kbar;
        s.c(scalar_index(b, 1, 0, 1)) = A / kRt2;
        s.c(scalar_index(b, 0, 1, 0)) = B / kRt2;
        return s;
    }
};

inline double dense(const std::function<double(double, double)>& f) {
    return oracle::periodic_trapezoid_2d(f, 1.0, 1.0, 600);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline RunConfig fixture_config() {
    RunConfig cfg;
    cfg.spec = {DomainMode::PeriodicTorus2D, {1.0, 1.0}, 128};
    cfg.j = 4;
    cfg.l = 5;
    cfg.n = 1000;
    cfg.params.eta = 0.5;
    cfg.params.zeta = 0.5;
    cfg.params.gamma = 0.3;
    cfg.params.theta = 0.5;
    cfg.params.beta = 1.0;
    cfg.params.cT = 0.9;
    cfg.params.cD = 0.7;
    cfg.params.cP = 1.3;
    cfg.params.cEps = 1.1;
    cfg.params.cFo = 0.6;
    cfg.params.cDa = 0.4;
    return cfg;
}

inline const Basis& fixture_basis() {
    static const Basis b = [] {
        const auto cfg = fixture_config();
        return build_basis(cfg.spec, cfg.j, cfg.l);
    }();
    return b;
}

}  // namespace turbkeps::fixtures
