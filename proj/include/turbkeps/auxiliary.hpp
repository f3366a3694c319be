#pragma once

namespace turbkeps {

/// Primitive of the unit truncation: k^2/2 on [0,1], k - 1/2 beyond.
/// Satisfies k - 1/2 <= H1(k) <= k.
double aux_H1(double k);

/// Test function 1 - (1+k)^(-delta) together with its derivative weight
/// delta/(1+k)^(delta+1) and primitive Upsilon(k) = int_0^k upsilon.
struct UpsilonValue {
    double value;
    double derivative;
    double primitive;
};

UpsilonValue aux_upsilon(double k, double delta);

/// Lambda(k) = int_0^k (1+s)^((zeta-delta-1)/2) ds in closed form, with
/// the logarithmic branch when zeta - delta + 1 == 0.
double aux_Lambda(double k, double zeta, double delta);

}  // namespace turbkeps
