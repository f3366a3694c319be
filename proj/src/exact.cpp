#include "turbkeps/exact.hpp"

#include <cfloat>
#include <cmath>
#include <numeric>
#include <sstream>

#include "turbkeps/errors.hpp"

namespace turbkeps {

namespace {

using i128 = __int128;

std::optional<Rational> make(i128 num, i128 den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    i128 a = num < 0 ? -num : num;
    i128 b = den;
    while (b != 0) {
        i128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    constexpr i128 lim = INT64_MAX;
    if (num > lim || num < -lim || den > lim) return std::nullopt;
    return Rational(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw Error(ErrorKind::Domain, "rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    num_ = num;
    den_ = den;
}

double Rational::to_double() const noexcept {
    return static_cast<double>(num_) / static_cast<double>(den_);
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

std::optional<Rational> Rational::recover(double x, std::int64_t max_den) {
    if (!std::isfinite(x)) return std::nullopt;
    const double tol = 4.0 * DBL_EPSILON * std::max(1.0, std::abs(x));
    // Continued-fraction convergents h/k.
    long double rem = x;
    long double h_prev = 1, h = std::floor(rem);
    long double k_prev = 0, k = 1;
    for (int iter = 0; iter < 64; ++iter) {
        if (k > max_den) break;
        if (std::abs(static_cast<double>(h / k) - x) <= tol) {
            if (std::abs(h) > static_cast<long double>(INT64_MAX)) return std::nullopt;
            return Rational(static_cast<std::int64_t>(h), static_cast<std::int64_t>(k));
        }
        long double frac = rem - std::floor(rem);
        if (frac == 0) break;
        rem = 1.0L / frac;
        long double a = std::floor(rem);
        long double h_next = a * h + h_prev;
        long double k_next = a * k + k_prev;
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
    return std::nullopt;
}

std::optional<Rational> Rational::add(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                static_cast<i128>(a.den_) * b.den_);
}

std::optional<Rational> Rational::sub(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.den_ - static_cast<i128>(b.num_) * a.den_,
                static_cast<i128>(a.den_) * b.den_);
}

std::optional<Rational> Rational::mul(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}

std::optional<Rational> Rational::div(const Rational& a, const Rational& b) {
    if (b.num_ == 0) return std::nullopt;
    return make(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}

int compare(const Rational& a, const Rational& b) {
    i128 lhs = static_cast<i128>(a.num_) * b.den_;
    i128 rhs = static_cast<i128>(b.num_) * a.den_;
    return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

ExactReal ExactReal::from_double(double v) {
    ExactReal r = inexact(v);
    r.exact_ = Rational::recover(v);
    return r;
}

ExactReal ExactReal::inexact(double v) {
    ExactReal r;
    r.value_ = v;
    r.exact_.reset();
    return r;
}

std::string ExactReal::str() const {
    if (exact_) return exact_->str();
    std::ostringstream os;
    os.precision(17);
    os << value_;
    return os.str();
}

namespace {

template <class ExactOp, class FloatOp>
ExactReal combine(const ExactReal& a, const ExactReal& b, ExactOp exact_op, FloatOp float_op) {
    if (a.is_exact() && b.is_exact()) {
        if (auto r = exact_op(*a.exact(), *b.exact())) return ExactReal(*r);
    }
    return ExactReal::inexact(float_op(a.value(), b.value()));
}

}  // namespace

ExactReal operator+(const ExactReal& a, const ExactReal& b) {
    return combine(a, b, Rational::add, [](double x, double y) { return x + y; });
}
ExactReal operator-(const ExactReal& a, const ExactReal& b) {
    return combine(a, b, Rational::sub, [](double x, double y) { return x - y; });
}
ExactReal operator*(const ExactReal& a, const ExactReal& b) {
    return combine(a, b, Rational::mul, [](double x, double y) { return x * y; });
}
ExactReal operator/(const ExactReal& a, const ExactReal& b) {
    if (b.value() == 0.0) throw Error(ErrorKind::Domain, "exponent arithmetic: division by zero");
    return combine(a, b, Rational::div, [](double x, double y) { return x / y; });
}

int compare(const ExactReal& a, const ExactReal& b) {
    if (a.is_exact() && b.is_exact()) return compare(*a.exact(), *b.exact());
    const double scale = std::max({1.0, std::abs(a.value()), std::abs(b.value())});
    const double diff = a.value() - b.value();
    if (std::abs(diff) <= ExactReal::kTolerance * scale) return 0;
    return diff < 0 ? -1 : 1;
}

ExactReal min(const ExactReal& a, const ExactReal& b) { return compare(b, a) < 0 ? b : a; }
ExactReal max(const ExactReal& a, const ExactReal& b) { return compare(b, a) > 0 ? b : a; }

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::Usage: return "usage error";
        case ErrorKind::Capacity: return "capacity error";
        case ErrorKind::Setup: return "setup error";
        case ErrorKind::Data: return "data error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Io: return "I/O error";
        case ErrorKind::SolverAbort: return "solver abort";
    }
    return "error";
}

}  // namespace turbkeps
