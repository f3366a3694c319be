#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace turbkeps {

/// Reduced fraction with 64-bit numerator and positive denominator.
/// Arithmetic is overflow-checked: operations that do not fit return
/// std::nullopt instead of wrapping.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    double to_double() const noexcept;
    std::string str() const;

    /// Best rational approximation of x with denominator <= max_den whose
    /// error is within a few ulps of x. Recovers 3/10 from the double 0.3.
    static std::optional<Rational> recover(double x, std::int64_t max_den = 1000000);

    static std::optional<Rational> add(const Rational& a, const Rational& b);
    static std::optional<Rational> sub(const Rational& a, const Rational& b);
    static std::optional<Rational> mul(const Rational& a, const Rational& b);
    static std::optional<Rational> div(const Rational& a, const Rational& b);

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    /// Exact three-way comparison via 128-bit cross multiplication.
    friend int compare(const Rational& a, const Rational& b);

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

/// A real number that stays an exact rational for as long as every input and
/// intermediate result is rational and fits, and otherwise degrades to a
/// double. Comparisons of inexact values use a relative tolerance of 1e-12.
class ExactReal {
public:
    static constexpr double kTolerance = 1e-12;

    ExactReal() : value_(0.0), exact_(Rational(0)) {}
    ExactReal(int v) : value_(v), exact_(Rational(v)) {}
    ExactReal(const Rational& r) : value_(r.to_double()), exact_(r) {}

    /// Lifts a double, recovering an exact rational when one is evident.
    static ExactReal from_double(double v);
    static ExactReal inexact(double v);

    double value() const noexcept { return value_; }
    bool is_exact() const noexcept { return exact_.has_value(); }
    const std::optional<Rational>& exact() const noexcept { return exact_; }
    /// "p/q" when exact, otherwise the shortest round-trip decimal.
    std::string str() const;

    friend ExactReal operator+(const ExactReal& a, const ExactReal& b);
    friend ExactReal operator-(const ExactReal& a, const ExactReal& b);
    friend ExactReal operator*(const ExactReal& a, const ExactReal& b);
    friend ExactReal operator/(const ExactReal& a, const ExactReal& b);

    /// -1, 0, +1; exact when both sides are exact, tolerance-based otherwise.
    friend int compare(const ExactReal& a, const ExactReal& b);
    friend bool operator<(const ExactReal& a, const ExactReal& b) { return compare(a, b) < 0; }
    friend bool operator>(const ExactReal& a, const ExactReal& b) { return compare(a, b) > 0; }
    friend bool operator<=(const ExactReal& a, const ExactReal& b) { return compare(a, b) <= 0; }
    friend bool operator>=(const ExactReal& a, const ExactReal& b) { return compare(a, b) >= 0; }
    friend bool operator==(const ExactReal& a, const ExactReal& b) { return compare(a, b) == 0; }

private:
    double value_;
    std::optional<Rational> exact_;
};

ExactReal min(const ExactReal& a, const ExactReal& b);
ExactReal max(const ExactReal& a, const ExactReal& b);

}  // namespace turbkeps
