#include "turbkeps/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "turbkeps/errors.hpp"

namespace turbkeps {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int sides(const DomainSpec& spec) { return spec.N; }

double spacing(const DomainSpec& spec, int axis) {
    return spec.mode == DomainMode::PeriodicTorus2D ? spec.extent[axis] / spec.N
                                                    : spec.extent[axis] / (spec.N + 1);
}

Grid torus_grid(const DomainSpec& spec, int points) {
    Grid g;
    g.n = points;
    g.x.resize(points);
    g.y.resize(points);
    for (int i = 0; i < points; ++i) {
        g.x[i] = spec.extent[0] * i / points;
        g.y[i] = spec.extent[1] * i / points;
    }
    g.weight = spec.area() / (static_cast<double>(points) * points);
    return g;
}

// Half-plane of wavevectors resolved by an N-point torus grid, sorted by
// |kappa|^2 with lexicographic tie-breaks.
std::vector<ModeDescriptor> torus_wavevectors(const DomainSpec& spec) {
    const int kmax = spec.N / 2 - 1;
    std::vector<ModeDescriptor> out;
    for (int m = 0; m <= kmax; ++m) {
        for (int n = -kmax; n <= kmax; ++n) {
            if (m == 0 && n <= 0) continue;
            const double kx = static_cast<double>(m) / spec.extent[0];
            const double ky = static_cast<double>(n) / spec.extent[1];
            const double k2 = kTwoPi * kTwoPi * (kx * kx + ky * ky);
            for (int kind : {0, 1}) out.push_back({{m, n}, kind, k2});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ModeDescriptor& a, const ModeDescriptor& b) {
        return std::tie(a.eigenvalue, a.index[0], a.index[1], a.kind) <
               std::tie(b.eigenvalue, b.index[0], b.index[1], b.kind);
    });
    return out;
}

// cos/sin of kappa . x at node (ix, iy) of an M-point torus grid. The phase
// is reduced as an integer so that periodicity is exact.
std::pair<double, double> torus_phase(const ModeDescriptor& m, int ix, int iy, int M) {
    long r = (static_cast<long>(m.index[0]) * ix + static_cast<long>(m.index[1]) * iy) % M;
    if (r < 0) r += M;
    const double phi = kTwoPi * static_cast<double>(r) / M;
    return {std::cos(phi), std::sin(phi)};
}

std::array<double, 2> kappa(const DomainSpec& spec, const ModeDescriptor& m) {
    return {kTwoPi * m.index[0] / spec.extent[0], kTwoPi * m.index[1] / spec.extent[1]};
}

VelocityTable torus_velocity_table(const DomainSpec& spec, const std::vector<ModeDescriptor>& modes,
                                   const Grid& g) {
    const auto nodes = static_cast<Eigen::Index>(g.size());
    const auto j = static_cast<Eigen::Index>(modes.size());
    VelocityTable t;
    for (auto* m : {&t.vx, &t.vy, &t.dxvx, &t.dyvx, &t.dxvy, &t.dyvy}) m->resize(nodes, j);
    const double s = std::sqrt(2.0 / spec.area());
    for (Eigen::Index c = 0; c < j; ++c) {
        const auto& mode = modes[c];
        const auto k = kappa(spec, mode);
        const double norm = std::hypot(k[0], k[1]);
        const double ex = -k[1] / norm, ey = k[0] / norm;
        for (int iy = 0; iy < g.n; ++iy) {
            for (int ix = 0; ix < g.n; ++ix) {
                const Eigen::Index r = static_cast<Eigen::Index>(iy) * g.n + ix;
                const auto [cs, sn] = torus_phase(mode, ix, iy, g.n);
                // value profile f and its phase derivative f'
                const double f = mode.kind == 0 ? cs : sn;
                const double df = mode.kind == 0 ? -sn : cs;
                t.vx(r, c) = s * ex * f;
                t.vy(r, c) = s * ey * f;
                t.dxvx(r, c) = s * ex * k[0] * df;
                t.dyvx(r, c) = s * ex * k[1] * df;
                t.dxvy(r, c) = s * ey * k[0] * df;
                t.dyvy(r, c) = s * ey * k[1] * df;
            }
        }
    }
    return t;
}

ScalarTable torus_scalar_table(const DomainSpec& spec, const std::vector<ModeDescriptor>& modes,
                               const Grid& g) {
    const auto nodes = static_cast<Eigen::Index>(g.size());
    const auto l = static_cast<Eigen::Index>(modes.size());
    ScalarTable t;
    for (auto* m : {&t.w, &t.dxw, &t.dyw}) m->resize(nodes, l);
    const double s = std::sqrt(2.0 / spec.area());
    const double s0 = 1.0 / std::sqrt(spec.area());
    for (Eigen::Index c = 0; c < l; ++c) {
        const auto& mode = modes[c];
        if (mode.kind == 2) {
            t.w.col(c).setConstant(s0);
            t.dxw.col(c).setZero();
            t.dyw.col(c).setZero();
            continue;
        }
        const auto k = kappa(spec, mode);
        for (int iy = 0; iy < g.n; ++iy) {
            for (int ix = 0; ix < g.n; ++ix) {
                const Eigen::Index r = static_cast<Eigen::Index>(iy) * g.n + ix;
                const auto [cs, sn] = torus_phase(mode, ix, iy, g.n);
                const double f = mode.kind == 0 ? cs : sn;
                const double df = mode.kind == 0 ? -sn : cs;
                t.w(r, c) = s * f;
                t.dxw(r, c) = s * k[0] * df;
                t.dyw(r, c) = s * k[1] * df;
            }
        }
    }
    return t;
}

std::vector<ModeDescriptor> box_sine_modes(const DomainSpec& spec) {
    std::vector<ModeDescriptor> out;
    const int pmax = spec.N / 2;
    for (int p = 1; p <= pmax; ++p) {
        for (int q = 1; q <= pmax; ++q) {
            const double a = std::numbers::pi * p / spec.extent[0];
            const double b = std::numbers::pi * q / spec.extent[1];
            out.push_back({{p, q}, 1, a * a + b * b});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ModeDescriptor& a, const ModeDescriptor& b) {
        return std::tie(a.eigenvalue, a.index[0], a.index[1]) <
               std::tie(b.eigenvalue, b.index[0], b.index[1]);
    });
    return out;
}

ScalarTable box_scalar_table(const DomainSpec& spec, const std::vector<ModeDescriptor>& modes,
                             const Grid& g) {
    const auto nodes = static_cast<Eigen::Index>(g.size());
    const auto l = static_cast<Eigen::Index>(modes.size());
    ScalarTable t;
    for (auto* m : {&t.w, &t.dxw, &t.dyw}) m->resize(nodes, l);
    const double s = 2.0 / std::sqrt(spec.area());
    for (Eigen::Index c = 0; c < l; ++c) {
        const double a = std::numbers::pi * modes[c].index[0] / spec.extent[0];
        const double b = std::numbers::pi * modes[c].index[1] / spec.extent[1];
        for (int iy = 0; iy < g.n; ++iy) {
            for (int ix = 0; ix < g.n; ++ix) {
                const Eigen::Index r = static_cast<Eigen::Index>(iy) * g.n + ix;
                const double sx = std::sin(a * g.x[ix]), cx = std::cos(a * g.x[ix]);
                const double sy = std::sin(b * g.y[iy]), cy = std::cos(b * g.y[iy]);
                t.w(r, c) = s * sx * sy;
                t.dxw(r, c) = s * a * cx * sy;
                t.dyw(r, c) = s * b * sx * cy;
            }
        }
    }
    return t;
}

// Central difference of nodal columns on the interior box grid, with zero
// values on the boundary.
Eigen::MatrixXd box_central(const Eigen::MatrixXd& f, int n, double h, int axis) {
    Eigen::MatrixXd out(f.rows(), f.cols());
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const int r = iy * n + ix;
            const int i = axis == 0 ? ix : iy;
            const int step = axis == 0 ? 1 : n;
            const bool has_lo = i > 0, has_hi = i < n - 1;
            for (Eigen::Index c = 0; c < f.cols(); ++c) {
                const double lo = has_lo ? f(r - step, c) : 0.0;
                const double hi = has_hi ? f(r + step, c) : 0.0;
                out(r, c) = (hi - lo) / (2.0 * h);
            }
        }
    }
    return out;
}

struct BoxVelocity {
    std::vector<ModeDescriptor> modes;
    VelocityTable table;
    double eigen_residual = 0.0;
};

// Stokes modes from the stream-function eigenproblem
//   int (Lap psi)^2 = lambda int |grad psi|^2,  psi = d_n psi = 0,
// discretized with the 5-point Laplacian (clamped ghosts on the boundary
// ring) and trapezoid weights. Velocities are central differences of psi,
// hence exactly discretely solenoidal.
BoxVelocity box_velocity(const DomainSpec& spec, int j, const Grid& g) {
    const int n = spec.N;
    const int dim = n * n;
    const double hx = spacing(spec, 0), hy = spacing(spec, 1);
    const double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy);

    auto at = [n](int ix, int iy) { return iy * n + ix; };

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const int r = at(ix, iy);
            A(r, r) = 2.0 * ihx2 + 2.0 * ihy2;
            if (ix > 0) A(r, at(ix - 1, iy)) = -ihx2;
            if (ix < n - 1) A(r, at(ix + 1, iy)) = -ihx2;
            if (iy > 0) A(r, at(ix, iy - 1)) = -ihy2;
            if (iy < n - 1) A(r, at(ix, iy + 1)) = -ihy2;
        }
    }
    A *= hx * hy;

    // Rows of the full Laplacian on the (n+2)^2 ring-including grid. On the
    // boundary the clamped ghost psi_{-1} = psi_1 leaves 2 psi_1 / h^2.
    const int full = n + 2;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(full * full, dim);
    Eigen::VectorXd W(full * full);
    auto interior = [n](int i) { return i >= 1 && i <= n; };
    for (int gy = 0; gy < full; ++gy) {
        for (int gx = 0; gx < full; ++gx) {
            const int row = gy * full + gx;
            const bool bx = gx == 0 || gx == full - 1;
            const bool by = gy == 0 || gy == full - 1;
            W(row) = hx * hy * (bx ? 0.5 : 1.0) * (by ? 0.5 : 1.0);
            if (bx && by) continue;
            if (bx) {
                const int nb = gx == 0 ? 1 : n;
                L(row, at(nb - 1, gy - 1)) += 2.0 * ihx2;
                continue;
            }
            if (by) {
                const int nb = gy == 0 ? 1 : n;
                L(row, at(gx - 1, nb - 1)) += 2.0 * ihy2;
                continue;
            }
            const int ix = gx - 1, iy = gy - 1;
            L(row, at(ix, iy)) -= 2.0 * ihx2 + 2.0 * ihy2;
            if (interior(gx - 1)) L(row, at(ix - 1, iy)) += ihx2;
            if (interior(gx + 1)) L(row, at(ix + 1, iy)) += ihx2;
            if (interior(gy - 1)) L(row, at(ix, iy - 1)) += ihy2;
            if (interior(gy + 1)) L(row, at(ix, iy + 1)) += ihy2;
        }
    }
    const Eigen::MatrixXd B = L.transpose() * W.asDiagonal() * L;

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(B, A);
    if (ges.info() != Eigen::Success)
        throw Error(ErrorKind::Setup, "Stokes eigen-solve failed to converge");

    BoxVelocity out;
    Eigen::MatrixXd psi = ges.eigenvectors().leftCols(j);
    for (int c = 0; c < j; ++c) {
        const double lambda = ges.eigenvalues()(c);
        const Eigen::VectorXd Bp = B * psi.col(c);
        const double res = (Bp - lambda * (A * psi.col(c))).norm() / std::max(Bp.norm(), 1e-300);
        out.eigen_residual = std::max(out.eigen_residual, res);
        out.modes.push_back({{c, 0}, 1, lambda});
    }

    // Velocity of each stream function, then modified Gram-Schmidt (twice)
    // in the discrete L2 product.
    Eigen::MatrixXd ux = box_central(psi, n, hy, 1);
    Eigen::MatrixXd uy = -box_central(psi, n, hx, 0);
    const double w = g.weight;
    for (int pass = 0; pass < 2; ++pass) {
        for (int c = 0; c < j; ++c) {
            for (int p = 0; p < c; ++p) {
                const double dot = w * (ux.col(c).dot(ux.col(p)) + uy.col(c).dot(uy.col(p)));
                ux.col(c) -= dot * ux.col(p);
                uy.col(c) -= dot * uy.col(p);
            }
            const double nrm = std::sqrt(w * (ux.col(c).squaredNorm() + uy.col(c).squaredNorm()));
            if (!(nrm > 1e-8))
                throw Error(ErrorKind::Setup, "Stokes mode " + std::to_string(c) +
                                                  " has degenerate discrete velocity");
            ux.col(c) /= nrm;
            uy.col(c) /= nrm;
        }
    }
    // Sign convention: the largest-magnitude entry of u_x (then u_y) is positive.
    for (int c = 0; c < j; ++c) {
        Eigen::Index ix = 0, iy = 0;
        const double mx = ux.col(c).cwiseAbs().maxCoeff(&ix);
        const double my = uy.col(c).cwiseAbs().maxCoeff(&iy);
        const double lead = mx >= my ? ux(ix, c) : uy(iy, c);
        if (lead < 0) {
            ux.col(c) *= -1.0;
            uy.col(c) *= -1.0;
        }
    }
    out.table.vx = ux;
    out.table.vy = uy;
    out.table.dxvx = box_central(ux, n, hx, 0);
    out.table.dyvx = box_central(ux, n, hy, 1);
    out.table.dxvy = box_central(uy, n, hx, 0);
    out.table.dyvy = box_central(uy, n, hy, 1);
    return out;
}

double gram_deviation(const Eigen::MatrixXd& a, const Eigen::MatrixXd* b, double w) {
    Eigen::MatrixXd G = w * a.transpose() * a;
    if (b) G += w * b->transpose() * *b;
    return (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

const Eigen::MatrixXd& scalar_columns(const Basis& b) { return b.base.tke.w; }

}  // namespace

const char* to_string(DomainMode mode) {
    return mode == DomainMode::PeriodicTorus2D ? "PeriodicTorus2D" : "DirichletBox2D";
}

void DomainSpec::validate() const {
    if (N < 8 || N % 2 != 0)
        throw Error(ErrorKind::Config, "grid points per side must be even and >= 8, got " +
                                           std::to_string(N));
    for (double e : extent)
        if (!(e > 0.0) || !std::isfinite(e))
            throw Error(ErrorKind::Config, "domain extent must be positive");
}

Grid base_grid(const DomainSpec& spec) {
    if (spec.mode == DomainMode::PeriodicTorus2D) return torus_grid(spec, spec.N);
    Grid g;
    g.n = spec.N;
    const double hx = spacing(spec, 0), hy = spacing(spec, 1);
    for (int i = 0; i < spec.N; ++i) {
        g.x.push_back(hx * (i + 1));
        g.y.push_back(hy * (i + 1));
    }
    g.weight = hx * hy;
    return g;
}

DiscreteField::DiscreteField(const DomainSpec& s, int comps, double fill)
    : spec(s), components(comps), values(static_cast<std::size_t>(s.N) * s.N * comps, fill) {}

std::string ModeDescriptor::label() const {
    if (kind == 2) return "const";
    return std::string(kind == 0 ? "cos" : "sin") + "(" + std::to_string(index[0]) + "," +
           std::to_string(index[1]) + ")";
}

int velocity_capacity(const DomainSpec& spec) {
    if (spec.mode == DomainMode::PeriodicTorus2D) return (spec.N - 1) * (spec.N - 1) - 1;
    return (spec.N / 2) * (spec.N / 2);
}

int tke_capacity(const DomainSpec& spec) {
    if (spec.mode == DomainMode::PeriodicTorus2D) return (spec.N - 1) * (spec.N - 1);
    return (spec.N / 2) * (spec.N / 2);
}

Basis build_basis(const DomainSpec& spec, int j, int l) {
    spec.validate();
    if (j < 1 || l < 1) throw Error(ErrorKind::Usage, "j and l must be positive");
    if (j > velocity_capacity(spec) || l > tke_capacity(spec))
        throw Error(ErrorKind::Capacity,
                    "requested j=" + std::to_string(j) + ", l=" + std::to_string(l) +
                        " exceeds grid capacity j<=" + std::to_string(velocity_capacity(spec)) +
                        ", l<=" + std::to_string(tke_capacity(spec)));
    Basis b;
    b.spec = spec;
    if (spec.mode == DomainMode::PeriodicTorus2D) {
        const auto waves = torus_wavevectors(spec);
        b.velocity_modes.assign(waves.begin(), waves.begin() + j);
        b.tke_modes.push_back({{0, 0}, 2, 0.0});
        b.tke_modes.insert(b.tke_modes.end(), waves.begin(), waves.begin() + (l - 1));
        b.base.grid = torus_grid(spec, spec.N);
        b.assembly.grid = torus_grid(spec, 3 * spec.N / 2);
        for (GridTables* t : {&b.base, &b.assembly}) {
            t->vel = torus_velocity_table(spec, b.velocity_modes, t->grid);
            t->tke = torus_scalar_table(spec, b.tke_modes, t->grid);
        }
        b.diagnostics.periodic_surrogate = true;
    } else {
        b.base.grid = base_grid(spec);
        auto box = box_velocity(spec, j, b.base.grid);
        b.velocity_modes = std::move(box.modes);
        b.base.vel = std::move(box.table);
        b.diagnostics.eigen_residual = box.eigen_residual;
        const auto sines = box_sine_modes(spec);
        b.tke_modes.assign(sines.begin(), sines.begin() + l);
        b.base.tke = box_scalar_table(spec, b.tke_modes, b.base.grid);
        b.assembly = b.base;
    }
    const double w = b.base.grid.weight;
    b.diagnostics.gram_deviation_velocity = gram_deviation(b.base.vel.vx, &b.base.vel.vy, w);
    b.diagnostics.gram_deviation_tke = gram_deviation(b.base.tke.w, nullptr, w);
    b.diagnostics.divergence_max = (b.base.vel.dxvx + b.base.vel.dyvy).cwiseAbs().maxCoeff();
    return b;
}

Eigen::VectorXd project(const DiscreteField& field, const Basis& basis, Family family) {
    if (!(field.spec == basis.spec)) throw Error(ErrorKind::Usage, "field and basis grids differ");
    const double w = basis.base.grid.weight;
    const auto nodes = static_cast<Eigen::Index>(field.nodes());
    if (family == Family::Tke) {
        if (field.components != 1) throw Error(ErrorKind::Usage, "TKE projection needs a scalar field");
        Eigen::Map<const Eigen::VectorXd> f(field.values.data(), nodes);
        return w * (scalar_columns(basis).transpose() * f);
    }
    if (field.components != 2) throw Error(ErrorKind::Usage, "velocity projection needs 2 components");
    Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<2>> fx(field.values.data(), nodes);
    Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<2>> fy(field.values.data() + 1, nodes);
    return w * (basis.base.vel.vx.transpose() * fx + basis.base.vel.vy.transpose() * fy);
}

DiscreteField evaluate(const Eigen::VectorXd& coeffs, const Basis& basis, Family family) {
    const int count = family == Family::Tke ? basis.l() : basis.j();
    if (coeffs.size() != count)
        throw Error(ErrorKind::Usage, "coefficient vector has length " + std::to_string(coeffs.size()) +
                                          ", basis has " + std::to_string(count));
    const auto nodes = static_cast<Eigen::Index>(basis.base.grid.size());
    if (family == Family::Tke) {
        DiscreteField out(basis.spec, 1);
        Eigen::Map<Eigen::VectorXd>(out.values.data(), nodes) = basis.base.tke.w * coeffs;
        return out;
    }
    DiscreteField out(basis.spec, 2);
    Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<2>>(out.values.data(), nodes) =
        basis.base.vel.vx * coeffs;
    Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<2>>(out.values.data() + 1, nodes) =
        basis.base.vel.vy * coeffs;
    return out;
}

double quad_integrate(const DiscreteField& field) {
    if (field.components != 1) throw Error(ErrorKind::Usage, "quad_integrate needs a scalar field");
    double s = 0.0;
    for (double v : field.values) {
        if (!std::isfinite(v)) throw Error(ErrorKind::Data, "non-finite value in quadrature");
        s += v;
    }
    return s * base_grid(field.spec).weight;
}

double discrete_divergence(const Eigen::VectorXd& coeffs, const Basis& basis) {
    if (coeffs.size() != basis.j()) throw Error(ErrorKind::Usage, "coefficient length mismatch");
    return ((basis.base.vel.dxvx + basis.base.vel.dyvy) * coeffs).cwiseAbs().maxCoeff();
}

std::vector<KernelTap> mollifier_kernel(const DomainSpec& spec, int n) {
    if (n < 1) throw Error(ErrorKind::Domain, "mollifier level n must be >= 1");
    const double delta = 1.0 / n;
    const double hx = spacing(spec, 0), hy = spacing(spec, 1);
    const int rx = static_cast<int>(std::floor(delta / hx));
    const int ry = static_cast<int>(std::floor(delta / hy));
    std::vector<KernelTap> taps;
    double sum = 0.0;
    for (int dy = -ry; dy <= ry; ++dy) {
        for (int dx = -rx; dx <= rx; ++dx) {
            const double sx = dx * hx / delta, sy = dy * hy / delta;
            const double r2 = sx * sx + sy * sy;
            if (r2 >= 1.0) continue;
            const double w = std::exp(-1.0 / (1.0 - r2));
            if (w == 0.0) continue;  // underflow at the rim
            taps.push_back({dx, dy, w});
            sum += w;
        }
    }
    for (auto& t : taps) t.weight /= sum;
    return taps;
}

MollifyResult mollify_k0(const DiscreteField& k0, int n, double C0) {
    if (k0.components != 1) throw Error(ErrorKind::Usage, "mollify_k0 needs a scalar field");
    const DomainSpec& spec = k0.spec;
    MollifyResult out;
    out.below_floor = std::any_of(k0.values.begin(), k0.values.end(), [C0](double v) { return v < C0; });
    const double delta = 1.0 / n;
    const auto taps = mollifier_kernel(spec, n);
    for (const auto& t : taps) out.kernel_sum += t.weight;
    if (delta <= std::max(spacing(spec, 0), spacing(spec, 1))) {
        out.field = k0;
        out.under_resolved = true;
        return out;
    }
    const int N = sides(spec);
    const bool torus = spec.mode == DomainMode::PeriodicTorus2D;
    auto sample = [&](int ix, int iy) {
        if (torus) {
            ix = ((ix % N) + N) % N;
            iy = ((iy % N) + N) % N;
        } else if (ix < 0 || iy < 0 || ix >= N || iy >= N) {
            return C0;
        }
        return k0.at(static_cast<std::size_t>(iy) * N + ix);
    };
    out.field = DiscreteField(spec, 1);
    for (int iy = 0; iy < N; ++iy) {
        for (int ix = 0; ix < N; ++ix) {
            const double center = sample(ix, iy);
            double acc = 0.0, lo = center, hi = center;
            for (const auto& t : taps) {
                const double v = sample(ix + t.dx, iy + t.dy);
                acc += t.weight * (v - center);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            // Written as a correction to the center value so constant data is
            // reproduced bit-exactly; the clamp keeps rounding inside the hull.
            out.field.at(static_cast<std::size_t>(iy) * N + ix) = std::clamp(center + acc, lo, hi);
        }
    }
    return out;
}

}  // namespace turbkeps
