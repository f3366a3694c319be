#include "turbkeps/auxiliary.hpp"

#include <cmath>

#include "turbkeps/errors.hpp"

namespace turbkeps {

double aux_H1(double k) {
    if (!(k >= 0.0)) throw Error(ErrorKind::Domain, "H1 requires k >= 0");
    return k <= 1.0 ? 0.5 * k * k : k - 0.5;
}

UpsilonValue aux_upsilon(double k, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw Error(ErrorKind::Domain, "upsilon requires 0 < delta < 1");
    if (!(k >= 0.0)) throw Error(ErrorKind::Domain, "upsilon requires k >= 0");
    UpsilonValue out;
    // 1 - (1+k)^-delta = -expm1(-delta log1p(k)) keeps accuracy near k = 0
    out.value = -std::expm1(-delta * std::log1p(k));
    out.derivative = delta * std::pow(1.0 + k, -(delta + 1.0));
    // int_0^k (1+s)^-delta ds = ((1+k)^(1-delta) - 1) / (1-delta)
    const double tail = std::expm1((1.0 - delta) * std::log1p(k)) / (1.0 - delta);
    out.primitive = k - tail;
    return out;
}

double aux_Lambda(double k, double zeta, double delta) {
    if (!(k >= 0.0)) throw Error(ErrorKind::Domain, "Lambda requires k >= 0");
    const double e = zeta - delta + 1.0;
    if (e == 0.0) return std::log1p(k);
    return 2.0 / e * std::expm1(0.5 * e * std::log1p(k));
}

}  // namespace turbkeps
