#include "turbkeps/model.hpp"

#include <cmath>
#include <sstream>

#include "turbkeps/errors.hpp"

namespace turbkeps {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::Config, "invalid model parameters: " + what);
}

void require_pair(double lo, double hi, const char* lo_name, const char* hi_name) {
    std::ostringstream os;
    os << lo_name << " and " << hi_name << " must satisfy 0 < " << lo_name << " <= " << hi_name
       << " (got " << lo << ", " << hi << ")";
    require(lo > 0.0 && hi > 0.0 && lo <= hi, os.str());
}

}  // namespace

void ModelParameters::validate() const {
    require(d >= 2 && d <= 4, "d must lie in [2, 4]");
    require(alpha > 1.0, "alpha must exceed 1");
    require(beta > 0.0, "beta must be positive");
    require(eta >= 0.0 && zeta >= 0.0 && gamma >= 0.0 && theta >= 0.0,
            "growth exponents eta, zeta, gamma, theta must be nonnegative");
    require_pair(cT, CT, "cT", "CT");
    require_pair(cD, CD, "cD", "CD");
    require_pair(cP, CP, "cP", "CP");
    require_pair(cEps, CEps, "cEps", "CEps");
    // Zero drag is allowed so that drag-free verification problems can be posed.
    require(cDa >= 0.0 && cFo >= 0.0, "cDa and cFo must be nonnegative");
    require(C0 > 0.0, "C0 must be positive");
    require(T_final > 0.0, "T_final must be positive");
    for (double v : {alpha, beta, eta, zeta, gamma, theta, cT, CT, cD, CD, cP, CP, cEps, CEps, cDa,
                     cFo, C0, T_final}) {
        require(std::isfinite(v), "all parameters must be finite");
    }
}

const char* to_string(LawKind kind) {
    switch (kind) {
        case LawKind::TurbViscosity: return "TurbViscosity";
        case LawKind::TurbDiffusion: return "TurbDiffusion";
        case LawKind::TurbProduction: return "TurbProduction";
        case LawKind::TurbDissipation: return "TurbDissipation";
    }
    return "?";
}

CoefficientLaw viscosity_law(const ModelParameters& p) {
    return {LawKind::TurbViscosity, p.eta, p.cT, {}};
}
CoefficientLaw diffusion_law(const ModelParameters& p) {
    return {LawKind::TurbDiffusion, p.zeta, p.cD, {}};
}
CoefficientLaw production_law(const ModelParameters& p) {
    return {LawKind::TurbProduction, p.gamma, p.cP, {}};
}
CoefficientLaw dissipation_law(const ModelParameters& p) {
    return {LawKind::TurbDissipation, p.theta, p.cEps, {}};
}

double eval_coefficient(const CoefficientLaw& law, double k) {
    if (!(k >= 0.0)) {
        std::ostringstream os;
        os << to_string(law.kind) << " evaluated at k = " << k << " < 0";
        throw Error(ErrorKind::Domain, os.str());
    }
    double v;
    if (law.kind == LawKind::TurbDissipation) {
        // eps(k) = k e(k) with e(k) = scale k^theta
        v = law.exponent == 0.0 ? law.scale * k : law.scale * std::pow(k, law.exponent + 1.0);
    } else {
        v = law.exponent == 0.0 ? law.scale : law.scale * std::pow(1.0 + k, law.exponent);
    }
    if (law.multiplier) v *= law.multiplier(k);
    return v;
}

double truncate(int n, double k) {
    const double h = static_cast<double>(n);
    if (std::abs(k) <= h) return k;
    return k > 0 ? h : -h;
}

double truncated_coefficient(const CoefficientLaw& law, int n, double k) {
    if (law.kind == LawKind::TurbDissipation)
        throw Error(ErrorKind::Usage, "the dissipation law is never truncated");
    return eval_coefficient(law, truncate(n, k > 0.0 ? k : 0.0));
}

double cutoff_profile(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    // f(x) = exp(-1/x) partition: f(2-s) / (f(2-s) + f(s-1))
    const double a = std::exp(-1.0 / (2.0 - s));
    const double b = std::exp(-1.0 / (s - 1.0));
    return a / (a + b);
}

double cutoff(int n, double tau) {
    if (!(tau >= 0.0)) throw Error(ErrorKind::Domain, "cutoff argument must be nonnegative");
    return cutoff_profile(tau / static_cast<double>(n));
}

}  // namespace turbkeps
