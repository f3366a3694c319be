#pragma once

#include <array>

#include "turbkeps/exact.hpp"
#include "turbkeps/model.hpp"

namespace turbkeps {

/// Integrability and regularity exponents implied by the model parameters.
/// Every value is an ExactReal: exact rationals whenever the inputs are.
struct DerivedExponents {
    ExactReal r_u;    ///< max{2(d+2)/d, alpha}
    ExactReal rho_k;  ///< max{2(d+2)/d, theta+2}
    ExactReal r_k;    ///< zeta + 1 + 2/d

    /// Candidates of the time-derivative exponent for u; sigma0 is their min.
    /// Branch chosen by whether r_u equals 2(d+2)/d (drag branch otherwise).
    std::array<ExactReal, 3> sigma_terms;
    ExactReal sigma0;
    bool sigma_drag_branch = false;

    ExactReal rho1;  ///< d/(d-1)
    ExactReal rho2;  ///< (d zeta + d + 2)/(d zeta + d + 1)
    ExactReal rho3;  ///< transport k u, max of both branches
    ExactReal rho4;  ///< production, max of both branches
    ExactReal rho5;  ///< dissipation, (d zeta + d + 2)/(d (theta+1))
    ExactReal rho0;          ///< min{rho1, rho2, rho3, rho4}
    ExactReal rho0_reduced;  ///< min{rho2, rho3 branch, rho4 branch}, rho1 omitted

    /// Gradient integrability: 2 for zeta > 1 (attained); otherwise the
    /// supremum 1 + (d zeta + 1)/(d + 1), which is excluded.
    ExactReal q_gradient;
    bool q_gradient_attained = false;
};

struct AdmissibilityReport {
    bool cond1_ok = false;  ///< eta < r_k
    bool cond2_ok = false;  ///< theta < zeta + 2/d
    bool cond3_ok = false;  ///< gamma/(theta+1) + beta/r_u < 1
    std::array<ExactReal, 3> margins;  ///< rhs - lhs of each inequality
    DerivedExponents derived;

    bool admissible() const { return cond1_ok && cond2_ok && cond3_ok; }
    /// Name of the first violated condition ("Cond1", "Cond2", "Cond3"), or "".
    const char* first_violation() const;
};

DerivedExponents derive_exponents(const ModelParameters& params);
AdmissibilityReport check_admissibility(const ModelParameters& params);

}  // namespace turbkeps
