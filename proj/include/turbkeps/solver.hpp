#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "turbkeps/basis.hpp"
#include "turbkeps/integrator.hpp"
#include "turbkeps/model.hpp"

namespace turbkeps {

enum class PositivityPolicy { Monitor, Floor };

/// Time-constant body force.
struct Forcing {
    enum class Kind { Zero, Constant, Mode };
    Kind kind = Kind::Zero;
    std::array<double, 2> vector{0.0, 0.0};  ///< Constant
    int mode = 0;                            ///< Mode: 0-based velocity mode index
    double amplitude = 0.0;                  ///< Mode

    friend bool operator==(const Forcing&, const Forcing&) = default;
};

/// Initial data before mollification and projection.
struct InitialSpec {
    enum class Velocity { Zero, Mode, File };
    enum class Tke { Constant, Cosine, File };
    Velocity u0 = Velocity::Zero;
    int u0_mode = 0;  ///< 0-based velocity mode index
    double u0_amplitude = 0.0;
    Tke k0 = Tke::Constant;
    double k0_value = 1.0;      ///< Constant level, or mean of the cosine profile
    double k0_amplitude = 0.0;  ///< k0 = value + amplitude * cos(2 pi x / Lx)
    std::string u0_file, k0_file;
    bool mollify = true;

    friend bool operator==(const InitialSpec&, const InitialSpec&) = default;
};

enum class SweepAxis { Truncation, J, L };  ///< n, j or l

const char* to_string(SweepAxis axis);

struct SweepSpec {
    SweepAxis axis = SweepAxis::J;
    std::vector<int> levels;

    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct OutputSettings {
    int uniform_intervals = 512;  ///< uniform sample grid on [0, T]
    int geometric_levels = 12;    ///< extra samples T * 2^-m, m = 1..levels
    std::vector<double> extra_times;
    bool energy = true, tke_l1 = true, gradient = true, transport = true, ic = true,
         weak_residual = true;

    friend bool operator==(const OutputSettings&, const OutputSettings&) = default;
};

struct RunConfig {
    ModelParameters params;
    DomainSpec spec;
    int n = 8;  ///< truncation level
    int j = 16, l = 16;
    Forcing forcing;
    IntegratorSettings integrator;
    InitialSpec initial;
    OutputSettings output;
    PositivityPolicy positivity = PositivityPolicy::Monitor;
    bool apply_cutoff = true;
    bool override_admissibility = false;
    std::optional<SweepSpec> sweep;

    /// Structural checks (not admissibility). Throws Error(Config).
    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Sorted, de-duplicated sample times in [0, T_final].
std::vector<double> sample_times(const RunConfig& cfg);

struct GalerkinState {
    double t = 0.0;
    Eigen::VectorXd a;  ///< velocity coefficients (length j)
    Eigen::VectorXd c;  ///< TKE coefficients (length l)
};

struct StepDiagnostics {
    double t = 0.0, dt = 0.0, local_error = 0.0, min_k = 0.0, energy_residual = 0.0;
};

struct RunStats {
    long accepted = 0, rejected = 0, rhs_evaluations = 0;
    long positivity_events = 0;    ///< accepted steps with min k < 0
    double max_floored_mass = 0.0; ///< Floor policy: largest int max(-k, 0)
    bool mollifier_under_resolved = false;
    bool k0_below_C0 = false;
    bool admissibility_overridden = false;
};

struct Trajectory {
    std::vector<GalerkinState> states;  ///< at sample times; states[0] is the projected data
    std::vector<StepDiagnostics> steps;
    RunStats stats;
};

/// Per-mode contributions to dc/dt; their sum is the TKE right-hand side.
struct TkeTerms {
    Eigen::VectorXd transport, diffusion, dissipation, generation, production;
    Eigen::VectorXd total() const { return transport + diffusion + dissipation + generation + production; }
};

/// Power balance of the velocity equation at one state:
/// d/dt 1/2|u|^2 = convective - dissipation - darcy - forchheimer + forcing.
struct EnergyBudget {
    double energy = 0.0;       ///< 1/2 ||u||^2
    double dissipation = 0.0;  ///< || sqrt(nu_T) D(u) ||^2
    double darcy = 0.0;        ///< c_Da ||u||^2
    double forchheimer = 0.0;  ///< c_Fo ||u||_alpha^alpha
    double forcing = 0.0;      ///< int g.u
    double convective = 0.0;   ///< a . (convective part of da/dt)
    double residual = 0.0;     ///< a . da/dt + dissipation + drag - forcing
};

/// The assembled Galerkin ODE for one configuration and basis. Immutable
/// after construction and safe to share between threads.
class GalerkinSystem {
public:
    GalerkinSystem(const RunConfig& cfg, const Basis& basis);

    Eigen::VectorXd velocity_rhs(const GalerkinState& s) const;
    Eigen::VectorXd tke_rhs(const GalerkinState& s) const;
    TkeTerms tke_terms(const GalerkinState& s) const;
    EnergyBudget energy_budget(const GalerkinState& s) const;
    /// Convective part of da/dt alone (cut off or not per cfg).
    Eigen::VectorXd convective_rhs(const GalerkinState& s) const;

    /// Combined right-hand side on y = [a; c]. Non-finite nodal values flow
    /// through so the integrator can reject the trial step.
    void rhs(const Eigen::VectorXd& y, Eigen::VectorXd& dy) const;

    /// Minimum of k over assembly nodes and int max(-k, 0).
    std::pair<double, double> negativity(const Eigen::VectorXd& c) const;

    const RunConfig& config() const { return cfg_; }
    const Basis& basis() const { return basis_; }

private:
    struct Nodal;
    Nodal nodal(const Eigen::VectorXd& a, const Eigen::VectorXd& c) const;
    Eigen::VectorXd velocity_rhs(const Nodal& f, bool convective_only) const;
    TkeTerms tke_terms(const Nodal& f) const;

    RunConfig cfg_;
    const Basis& basis_;
    CoefficientLaw nu_T_, nu_D_, nu_P_, eps_;
    Eigen::VectorXd gx_, gy_;  ///< forcing at assembly nodes
};

/// Throws Error(SolverAbort) when any nodal field is non-finite.
Eigen::VectorXd assemble_velocity_rhs(const GalerkinState& s, const RunConfig& cfg, const Basis& basis);
Eigen::VectorXd assemble_tke_rhs(const GalerkinState& s, const RunConfig& cfg, const Basis& basis);

struct StepResult {
    GalerkinState state;
    bool accepted = false;
    double dt_next = 0.0;
    double local_error = 0.0;
};

/// One adaptive Dormand-Prince attempt of size dt from `s`.
StepResult step(const GalerkinState& s, double dt, const RunConfig& cfg, const Basis& basis);

/// Projected (and, if enabled, mollified) initial data.
GalerkinState initial_state(const RunConfig& cfg, const Basis& basis, RunStats* stats = nullptr);

/// Checks admissibility (Error(Config) naming the violated condition unless
/// overridden), builds the basis and integrates to T_final.
Trajectory run(const RunConfig& cfg);
Trajectory run(const RunConfig& cfg, const Basis& basis);

/// CSV with columns t,dt,local_error,min_k,energy_residual.
void write_diagnostics_csv(std::ostream& out, const Trajectory& traj);

/// Velocity (2 components) and k stacked as a 3-component field at base nodes.
DiscreteField state_field(const GalerkinState& s, const Basis& basis);
GalerkinState state_from_field(const DiscreteField& f, double t, const Basis& basis);

}  // namespace turbkeps
