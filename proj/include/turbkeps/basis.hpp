#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace turbkeps {

enum class DomainMode { PeriodicTorus2D, DirichletBox2D };

const char* to_string(DomainMode mode);

/// Computational domain [0,Lx] x [0,Ly] sampled by N points per side.
/// On the torus the nodes are i*L/N; in the box they are the N interior
/// points (i+1)*L/(N+1) of a Dirichlet grid.
struct DomainSpec {
    DomainMode mode = DomainMode::PeriodicTorus2D;
    std::array<double, 2> extent{1.0, 1.0};
    int N = 16;

    /// Throws Error(Config): N even and >= 8, extents positive and finite.
    void validate() const;
    double area() const { return extent[0] * extent[1]; }

    friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

/// Tensor grid with uniform quadrature weight. Node index is iy * n + ix.
struct Grid {
    int n = 0;
    std::vector<double> x, y;
    double weight = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(n) * n; }
    std::array<double, 2> node(std::size_t i) const { return {x[i % n], y[i / n]}; }
};

/// Nodal quadrature grid on which fields live.
Grid base_grid(const DomainSpec& spec);

/// Nodal samples on the base grid of `spec`. Vector fields interleave their
/// components: values[node * components + c].
struct DiscreteField {
    DomainSpec spec;
    int components = 1;
    std::vector<double> values;

    DiscreteField() = default;
    DiscreteField(const DomainSpec& s, int comps, double fill = 0.0);

    std::size_t nodes() const { return static_cast<std::size_t>(spec.N) * spec.N; }
    double& at(std::size_t node, int c = 0) { return values[node * components + c]; }
    double at(std::size_t node, int c = 0) const { return values[node * components + c]; }
};

enum class Family { Velocity, Tke };

struct ModeDescriptor {
    /// Torus: wavevector integers (m, n). Box scalars: sine indices (p, q).
    /// Box velocity: (eigen index, 0).
    std::array<int, 2> index{0, 0};
    /// 0 cosine, 1 sine, 2 constant; box modes use 1.
    int kind = 0;
    /// |kappa|^2 on the torus, sine or Stokes eigenvalue in the box.
    double eigenvalue = 0.0;

    std::string label() const;
};

/// Mode values and first derivatives tabulated at grid nodes, one column per
/// mode. For velocity, dyvx holds d(v_x)/dy and so on.
struct VelocityTable {
    Eigen::MatrixXd vx, vy, dxvx, dyvx, dxvy, dyvy;
};
struct ScalarTable {
    Eigen::MatrixXd w, dxw, dyw;
};
struct GridTables {
    Grid grid;
    VelocityTable vel;
    ScalarTable tke;
};

struct BasisDiagnostics {
    double gram_deviation_velocity = 0.0;  ///< max |G - I| on the base grid
    double gram_deviation_tke = 0.0;
    double divergence_max = 0.0;           ///< max nodal |div v_i|
    double eigen_residual = 0.0;           ///< box only: max relative residual
    bool periodic_surrogate = false;       ///< torus modes do not satisfy u = 0 on the boundary
};

/// Immutable Galerkin basis. `base` tables live on the field grid; `assembly`
/// tables are used for the nonlinear weak-form integrals (a 3/2-refined grid
/// on the torus, which integrates cubic mode products exactly).
struct Basis {
    DomainSpec spec;
    std::vector<ModeDescriptor> velocity_modes;
    std::vector<ModeDescriptor> tke_modes;
    GridTables base;
    GridTables assembly;
    BasisDiagnostics diagnostics;

    int j() const { return static_cast<int>(velocity_modes.size()); }
    int l() const { return static_cast<int>(tke_modes.size()); }
};

/// Largest j and l that `spec` resolves.
int velocity_capacity(const DomainSpec& spec);
int tke_capacity(const DomainSpec& spec);

/// Throws Error(Capacity) when j or l exceed the capacity, Error(Setup) when
/// the box eigen-solve fails.
Basis build_basis(const DomainSpec& spec, int j, int l);

/// Coefficients (f, mode_i) by base-grid quadrature. Error(Usage) on grid or
/// component mismatch.
Eigen::VectorXd project(const DiscreteField& field, const Basis& basis, Family family);

/// Sum of coeffs_i * mode_i at base-grid nodes.
DiscreteField evaluate(const Eigen::VectorXd& coeffs, const Basis& basis, Family family);

/// Quadrature of a scalar field. Error(Data) on non-finite input.
double quad_integrate(const DiscreteField& field);

/// Maximum nodal |div v| of a field given by velocity coefficients, using
/// the basis derivative tables.
double discrete_divergence(const Eigen::VectorXd& coeffs, const Basis& basis);

struct MollifyResult {
    DiscreteField field;
    bool under_resolved = false;
    bool below_floor = false;  ///< input had values < C0
    double kernel_sum = 0.0;
};

/// Discrete Friedrichs mollification with the bump exp(-1/(1-|x/delta|^2)),
/// delta = 1/n. Samples outside the box take the value C0; the torus wraps.
MollifyResult mollify_k0(const DiscreteField& k0, int n, double C0);

/// Normalized kernel weights for radius 1/n on the grid of `spec`, as
/// (offset x, offset y, weight) triples.
struct KernelTap {
    int dx, dy;
    double weight;
};
std::vector<KernelTap> mollifier_kernel(const DomainSpec& spec, int n);

}  // namespace turbkeps
