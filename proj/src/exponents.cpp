#include "turbkeps/exponents.hpp"

namespace turbkeps {

DerivedExponents derive_exponents(const ModelParameters& p) {
    const ExactReal d(p.d);
    const ExactReal one(1), two(2);
    const ExactReal alpha = ExactReal::from_double(p.alpha);
    const ExactReal beta = ExactReal::from_double(p.beta);
    const ExactReal eta = ExactReal::from_double(p.eta);
    const ExactReal zeta = ExactReal::from_double(p.zeta);
    const ExactReal gamma = ExactReal::from_double(p.gamma);
    const ExactReal theta = ExactReal::from_double(p.theta);

    DerivedExponents e;
    const ExactReal parabolic = two * (d + two) / d;
    e.r_u = max(parabolic, alpha);
    e.rho_k = max(parabolic, theta + two);
    e.r_k = zeta + one + two / d;

    // Recurring combination d zeta + d + 2.
    const ExactReal dz = d * zeta + d + two;

    const ExactReal visc_term = two * dz / (d * zeta + d * eta + d + two);
    e.sigma_drag_branch = !(e.r_u == parabolic);
    if (!e.sigma_drag_branch) {
        const ExactReal s = one + two / d;
        e.sigma_terms = {visc_term, s, s / (alpha - one)};
    } else {
        e.sigma_terms = {visc_term, alpha / two, alpha / (alpha - one)};
    }
    e.sigma0 = min(min(e.sigma_terms[0], e.sigma_terms[1]), e.sigma_terms[2]);

    e.rho1 = d / (d - one);
    e.rho2 = dz / (d * zeta + d + one);
    const ExactReal rho3_parabolic = two * dz * (d + two) / (d * (d * zeta + ExactReal(3) * d + ExactReal(6)));
    const ExactReal rho3_drag = alpha * dz / (d * zeta + d * alpha + d + two);
    e.rho3 = max(rho3_parabolic, rho3_drag);
    const ExactReal rho4_parabolic =
        two * dz * (d + two) / (d * beta * dz + two * gamma * d * (d + two));
    const ExactReal rho4_drag = dz * alpha / (beta * dz + gamma * d * alpha);
    e.rho4 = max(rho4_parabolic, rho4_drag);
    e.rho5 = dz / (d * (theta + one));

    e.rho0 = min(min(e.rho1, e.rho2), min(e.rho3, e.rho4));
    if (!e.sigma_drag_branch) {
        e.rho0_reduced = min(e.rho2, min(rho3_parabolic, rho4_parabolic));
    } else {
        e.rho0_reduced = min(e.rho2, min(rho3_drag, rho4_drag));
    }

    if (zeta > one) {
        e.q_gradient = two;
        e.q_gradient_attained = true;
    } else {
        e.q_gradient = one + (d * zeta + one) / (d + one);
        e.q_gradient_attained = false;
    }
    return e;
}

AdmissibilityReport check_admissibility(const ModelParameters& p) {
    AdmissibilityReport rep;
    rep.derived = derive_exponents(p);
    const ExactReal d(p.d);
    const ExactReal one(1), two(2);
    const ExactReal beta = ExactReal::from_double(p.beta);
    const ExactReal eta = ExactReal::from_double(p.eta);
    const ExactReal zeta = ExactReal::from_double(p.zeta);
    const ExactReal gamma = ExactReal::from_double(p.gamma);
    const ExactReal theta = ExactReal::from_double(p.theta);

    rep.margins[0] = rep.derived.r_k - eta;
    rep.margins[1] = zeta + two / d - theta;
    rep.margins[2] = one - (gamma / (theta + one) + beta / rep.derived.r_u);
    rep.cond1_ok = rep.margins[0] > ExactReal(0);
    rep.cond2_ok = rep.margins[1] > ExactReal(0);
    rep.cond3_ok = rep.margins[2] > ExactReal(0);
    return rep;
}

const char* AdmissibilityReport::first_violation() const {
    if (!cond1_ok) return "Cond1";
    if (!cond2_ok) return "Cond2";
    if (!cond3_ok) return "Cond3";
    return "";
}

}  // namespace turbkeps
