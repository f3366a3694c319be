#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "turbkeps/basis.hpp"
#include "turbkeps/solver.hpp"

namespace turbkeps {

/// One audited estimate. Bounded records compare lhs against rhs (lhs <= rhs
/// unless noted); data records carry a measured value only.
struct AuditRecord {
    std::string name;
    std::string anchor;  ///< phrase locating the audited estimate in the source analysis
    double lhs = 0.0;
    std::optional<double> rhs;
    bool satisfied = true;
    double margin = 0.0;  ///< finite; positive when satisfied
    std::string verdict;  ///< "satisfied", "violated" or "data"
    std::optional<double> exponent;
    std::string note;
};

struct AuditReport {
    std::vector<AuditRecord> records;
    long positivity_violations = 0;  ///< accepted steps with min k < 0
    double min_k = std::numeric_limits<double>::infinity();  ///< over all samples and assembly nodes
    bool below_C0 = false;           ///< min k < C0, contrary to the lower bound claimed for k
    bool resolution_warning = false; ///< uniform samples missing, trapezoid fallback used
    std::vector<std::string> notes;

    void merge(AuditReport other);
    /// Throws Error(Usage) when no record has this name.
    const AuditRecord& at(const std::string& name) const;
    bool contains(const std::string& name) const;
};

/// Velocity, its gradient, k and its gradient at assembly nodes.
struct NodalFields {
    Eigen::ArrayXd ux, uy, dxux, dyux, dxuy, dyuy, k, kx, ky;
};

/// Spatial integrals of one state by assembly-grid quadrature. Coefficient
/// laws see max(k, 0) and the truncation level of the run. Keeps a
/// reference to `basis`.
class NormEngine {
public:
    NormEngine(const RunConfig& cfg, const Basis& basis);

    NodalFields fields(const GalerkinState& s) const;
    double integrate(const Eigen::ArrayXd& f) const;

    double velocity_lp(const NodalFields& f, double p) const;        ///< int |u|^p
    double velocity_gradient_sq(const NodalFields& f) const;         ///< int |grad u|^2
    double strain_dissipation(const NodalFields& f) const;           ///< int nu_T^(n)(k) |D u|^2
    double tke_lp(const NodalFields& f, double p) const;             ///< int |k|^p
    double h1_l1(const NodalFields& f) const;                        ///< int H1(max(k,0))
    double production_weight(const NodalFields& f) const;           ///< int |u|^beta (1+|k|)^gamma
    double weighted_gradient(const NodalFields& f, double delta) const;  ///< int |grad k|^2 (1+k)^(zeta-delta-1)
    double lambda_gradient(const NodalFields& f, double delta) const;    ///< int |grad Lambda(k)|^2
    double tke_gradient_lq(const NodalFields& f, double q) const;    ///< int |grad k|^q
    double transport_lp(const NodalFields& f, double rho) const;     ///< int |k u|^rho
    double production_lp(const NodalFields& f, double rho) const;    ///< int (nu_P^(n)(k) |u|^beta)^rho
    double diffusion_flux_lp(const NodalFields& f, double rho) const;  ///< int |nu_D^(n)(k) grad k|^rho
    double dissipation_lp(const NodalFields& f, double rho) const;   ///< int eps(k)^rho

private:
    RunConfig cfg_;
    const Basis& basis_;
    CoefficientLaw nu_T_, nu_D_, nu_P_, eps_;
};

/// States on the uniform grid T*i/U, i = 0..U, or, when some are missing,
/// all states in time order with `uniform` false.
struct TimeSamples {
    std::vector<const GalerkinState*> states;
    std::vector<double> t;
    bool uniform = false;
};

TimeSamples uniform_samples(const Trajectory& traj, const RunConfig& cfg);

/// Composite Simpson on uniform samples (even interval count), trapezoid otherwise.
double time_integral(const TimeSamples& ts, const std::vector<double>& values);

AuditReport energy_report(const Trajectory& traj, const RunConfig& cfg, const Basis& basis);
AuditReport tke_l1_report(const Trajectory& traj, const RunConfig& cfg, const Basis& basis);
/// Throws Error(Domain) unless 0 < delta < 1.
AuditReport weighted_gradient_report(const Trajectory& traj, const RunConfig& cfg, const Basis& basis,
                                     double delta);
AuditReport transport_production_report(const Trajectory& traj, const RunConfig& cfg, const Basis& basis);
/// Throws Error(Config) when the geometric samples T*2^-m are missing.
AuditReport ic_attainment_report(const Trajectory& traj, const RunConfig& cfg, const Basis& basis);
AuditReport weak_residual_report(const Trajectory& traj, const RunConfig& cfg, const Basis& basis);

/// Deltas of the weighted-gradient sweep.
inline constexpr double kGradientDeltas[] = {0.2, 0.1, 0.05};

/// All reports enabled in cfg.output.
AuditReport audit(const Trajectory& traj, const RunConfig& cfg, const Basis& basis);

struct LevelResult {
    int level = 0;
    bool ok = false;
    std::string failure;        ///< error kind and message when !ok
    std::uint64_t hash = 0;     ///< FNV-1a of the sampled states
    std::vector<double> values; ///< one per UniformityReport::quantities entry
};

struct QuantitySummary {
    std::string name;
    double coarsest = 0.0;  ///< value at the first successful level
    double max = 0.0, min = 0.0;
    bool bounded = false;             ///< max <= 1.5 * coarsest + 1e-12
    bool strictly_increasing = false; ///< across successful levels
};

struct UniformityReport {
    SweepAxis axis = SweepAxis::J;
    std::vector<int> levels;
    std::vector<LevelResult> results;
    std::vector<QuantitySummary> quantities;
    /// int_0^T ||u_{i+1} - u_i||^2 dt between consecutive successful levels.
    std::vector<double> velocity_differences;
    bool cauchy = false;  ///< velocity differences strictly decreasing
    std::string verdict;  ///< "bounded" or "growing"
    bool partial = false; ///< some level failed

    const QuantitySummary& quantity(const std::string& name) const;
};

/// Called on the worker thread after each successful level run; an exception
/// marks that level failed.
using LevelSink = std::function<void(const RunConfig& cfg, const Basis& basis, const Trajectory& traj)>;

/// Runs cfg_template once per level of `sweep` on up to `jobs` threads.
/// Failed levels are recorded, never thrown.
UniformityReport uniformity_study(const RunConfig& cfg_template, const SweepSpec& sweep, int jobs,
                                  const LevelSink& sink = {});

/// FNV-1a over the bit patterns of t, a and c of every state.
std::uint64_t trajectory_hash(const Trajectory& traj);

std::string to_json(const AuditReport& report);
std::string to_csv(const AuditReport& report);
std::string to_json(const UniformityReport& report);

}  // namespace turbkeps
