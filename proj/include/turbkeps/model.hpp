#pragma once

#include <functional>
#include <string>

namespace turbkeps {

/// Physical and analytic constants of the one-equation model with
/// Darcy-Forchheimer drag. Lower/upper pairs bound each k-dependent law:
///   cT (1+k)^eta   <= nu_T(k) <= CT (1+k)^eta
///   cD (1+k)^zeta  <= nu_D(k) <= CD (1+k)^zeta
///   cP (1+k)^gamma <= nu_P(k) <= CP (1+k)^gamma
///   cEps k^(theta+1) <= eps(k) <= CEps k^(theta+1)
struct ModelParameters {
    int d = 2;
    double alpha = 3.0;  ///< drag exponent, > 1
    double beta = 1.0;   ///< production exponent, > 0
    double eta = 0.0;
    double zeta = 0.0;
    double gamma = 0.0;
    double theta = 0.0;
    double cT = 1.0, CT = 1.0;
    double cD = 1.0, CD = 1.0;
    double cP = 1.0, CP = 1.0;
    double cEps = 1.0, CEps = 1.0;
    double cDa = 1.0;  ///< Darcy coefficient
    double cFo = 1.0;  ///< Forchheimer coefficient
    double C0 = 1.0;   ///< floor of the initial TKE
    double T_final = 1.0;

    /// Throws Error(Config) naming the first violated invariant.
    void validate() const;

    friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

enum class LawKind { TurbViscosity, TurbDiffusion, TurbProduction, TurbDissipation };

const char* to_string(LawKind kind);

/// One of the four k-dependent coefficient families. The evaluated law is
/// the equality case scale*(1+k)^exponent (scale*k^(exponent+1) for
/// dissipation), optionally times a bounded multiplier m(k).
struct CoefficientLaw {
    LawKind kind = LawKind::TurbViscosity;
    double exponent = 0.0;
    double scale = 1.0;
    /// Optional multiplier; must stay within [lower/scale, upper/scale] for
    /// the result to remain inside the sandwich. Empty means 1.
    std::function<double(double)> multiplier;
};

/// Laws built from the lower sandwich constants of `p`.
CoefficientLaw viscosity_law(const ModelParameters& p);
CoefficientLaw diffusion_law(const ModelParameters& p);
CoefficientLaw production_law(const ModelParameters& p);
CoefficientLaw dissipation_law(const ModelParameters& p);

/// Throws Error(Domain) for k < 0: callers floor k before evaluation.
double eval_coefficient(const CoefficientLaw& law, double k);

/// Truncation at height n: identity on [-n, n], n*k/|k| outside.
double truncate(int n, double k);

/// law(T_n(max(k, 0))); dissipation is never truncated (Error(Usage)).
double truncated_coefficient(const CoefficientLaw& law, int n, double k);

/// Smooth non-increasing ramp: 1 on [0,1], 0 on [2,inf).
double cutoff_profile(double s);

/// Phi(tau / n). Throws Error(Domain) for tau < 0.
double cutoff(int n, double tau);

}  // namespace turbkeps
