#include "turbkeps/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "turbkeps/errors.hpp"

namespace turbkeps {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension.
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// PI controller (Hairer's defaults with beta = 0.04).
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kSafe = 0.9;
constexpr double kFacMin = 0.2;   // largest shrink: h / 5
constexpr double kFacMax = 10.0;  // largest growth: 10 h

}  // namespace

void IntegratorSettings::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw Error(ErrorKind::Config, "integrator tolerances must be positive");
    if (!(max_dt > 0.0) || !(dt_init > 0.0))
        throw Error(ErrorKind::Config, "integrator step sizes must be positive");
    if (max_steps < 1) throw Error(ErrorKind::Config, "max_steps must be positive");
}

Dopri5::Dopri5(Rhs rhs, IntegratorSettings settings) : rhs_(std::move(rhs)), s_(settings) {}

void Dopri5::reset(double t0, const Eigen::VectorXd& y0, double h0) {
    t_ = t_old_ = t0;
    y_ = y0;
    h_ = std::min(h0 > 0.0 ? h0 : s_.dt_init, s_.max_dt);
    facold_ = 1e-4;
    last_rejected_ = false;
    accepted_ = rejected_ = evals_ = 0;
    k1_.resize(y0.size());
    rhs_(t_, y_, k1_);
    ++evals_;
    for (auto* v : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_, &err_, &r1_, &r2_, &r3_, &r4_, &r5_})
        v->resize(y0.size());
    r1_ = y_;
    r2_.setZero();
    r3_.setZero();
    r4_.setZero();
    r5_.setZero();
    h_dense_ = 0.0;
}

bool Dopri5::attempt(double t_end) {
    double h = std::min(h_, s_.max_dt);
    bool last = false;
    if (t_ + h >= t_end || t_ + 1.01 * h >= t_end) {
        h = t_end - t_;
        last = true;
    }
    last_h_ = h;

    auto finite = [](const Eigen::VectorXd& v) { return v.allFinite(); };
    bool ok = true;
    ytmp_ = y_ + h * a21 * k1_;
    rhs_(t_ + c2 * h, ytmp_, k2_);
    ok = ok && finite(k2_);
    ytmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    rhs_(t_ + c3 * h, ytmp_, k3_);
    ok = ok && finite(k3_);
    ytmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t_ + c4 * h, ytmp_, k4_);
    ok = ok && finite(k4_);
    ytmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t_ + c5 * h, ytmp_, k5_);
    ok = ok && finite(k5_);
    ytmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    const double t_new = last ? t_end : t_ + h;
    rhs_(t_new, ytmp_, k6_);
    ok = ok && finite(k6_);
    ynew_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t_new, ynew_, k7_);
    ok = ok && finite(k7_);
    evals_ += 6;

    double err = std::numeric_limits<double>::infinity();
    if (ok) {
        err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            const double sk = s_.abs_tol + s_.rel_tol * std::max(std::abs(y_(i)), std::abs(ynew_(i)));
            const double q = err_(i) / sk;
            sum += q * q;
        }
        err = y_.size() > 0 ? std::sqrt(sum / static_cast<double>(y_.size())) : 0.0;
        if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    }
    last_err_ = err;

    const double fac11 = std::pow(err, kExpo);
    if (err <= 1.0) {
        double fac = fac11 / std::pow(facold_, kBeta);
        fac = std::clamp(fac / kSafe, 1.0 / kFacMax, 1.0 / kFacMin);
        double h_new = h / fac;
        if (last_rejected_) h_new = std::min(h_new, h);
        facold_ = std::max(err, 1e-4);

        const Eigen::VectorXd ydiff = ynew_ - y_;
        const Eigen::VectorXd bspl = h * k1_ - ydiff;
        r1_ = y_;
        r2_ = ydiff;
        r3_ = bspl;
        r4_ = ydiff - h * k7_ - bspl;
        r5_ = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
        h_dense_ = h;

        t_old_ = t_;
        t_ = t_new;
        y_.swap(ynew_);
        k1_.swap(k7_);
        // keep growth from the truncated final step out of the controller
        h_ = last ? std::max(h_new, h_) : h_new;
        h_ = std::min(h_, s_.max_dt);
        last_rejected_ = false;
        ++accepted_;
        return true;
    }
    const double shrink = std::isfinite(err) ? std::min(1.0 / kFacMin, fac11 / kSafe) : 1.0 / kFacMin;
    h_ = h / shrink;
    last_rejected_ = true;
    ++rejected_;
    return false;
}

Eigen::VectorXd Dopri5::interpolate(double t) const {
    if (h_dense_ == 0.0) return r1_;
    const double theta = (t - t_old_) / h_dense_;
    const double theta1 = 1.0 - theta;
    return r1_ + theta * (r2_ + theta1 * (r3_ + theta * (r4_ + theta1 * r5_)));
}

}  // namespace turbkeps
