#pragma once

#include <functional>

#include <Eigen/Dense>

namespace turbkeps {

struct IntegratorSettings {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    double max_dt = 0.05;
    double dt_init = 1e-4;
    long max_steps = 5'000'000;

    /// Throws Error(Config) on non-positive tolerances or step sizes.
    void validate() const;
    friend bool operator==(const IntegratorSettings&, const IntegratorSettings&) = default;
};

/// Dormand-Prince 5(4) with FSAL, Gustafsson PI step control and the
/// 4th-order continuous extension of Hairer, Norsett & Wanner.
class Dopri5 {
public:
    using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

    Dopri5(Rhs rhs, IntegratorSettings settings);

    /// Starts at (t0, y0) with trial step h0; h0 <= 0 uses settings.dt_init.
    void reset(double t0, const Eigen::VectorXd& y0, double h0 = 0.0);

    /// One attempt with the current trial step, never stepping past t_end.
    /// On acceptance the state advances and dense output refers to the step
    /// just taken. A trial stage with non-finite values counts as a rejection.
    bool attempt(double t_end);

    double t() const { return t_; }
    const Eigen::VectorXd& y() const { return y_; }
    double h_next() const { return h_; }
    /// Step size and error norm of the last attempt (accepted or not).
    double last_h() const { return last_h_; }
    double last_error() const { return last_err_; }
    long accepted() const { return accepted_; }
    long rejected() const { return rejected_; }
    long rhs_evaluations() const { return evals_; }

    /// Dense output inside the last accepted step [t_old, t].
    Eigen::VectorXd interpolate(double t) const;
    double t_old() const { return t_old_; }

private:
    Rhs rhs_;
    IntegratorSettings s_;
    double t_ = 0.0, t_old_ = 0.0, h_ = 0.0, h_dense_ = 0.0;
    double last_h_ = 0.0, last_err_ = 0.0, facold_ = 1e-4;
    bool last_rejected_ = false;
    long accepted_ = 0, rejected_ = 0, evals_ = 0;
    Eigen::VectorXd y_, k1_;
    Eigen::VectorXd k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_, err_;
    Eigen::VectorXd r1_, r2_, r3_, r4_, r5_;
};

}  // namespace turbkeps
