#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace abmtk {

/// Exact rational arithmetic on int64 numerator/denominator. All model
/// values, aggregates and enumeration weights are rationals so that traces
/// serialize bit-exactly and the exact-frequency oracle has no rounding.
/// Overflow beyond int64 (after gcd reduction) throws RuntimeError.
struct Rational {
    long long num = 0;
    long long den = 1; // always > 0

    Rational() = default;
    Rational(long long n) : num(n), den(1) {}
    Rational(long long n, long long d);

    static Rational from_decimal(long long scaled, int digits); // scaled * 10^-digits

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;
    Rational operator-() const { return Rational(-num, den); }

    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const;
    bool operator<=(const Rational& o) const { return *this < o || *this == o; }
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator>=(const Rational& o) const { return o <= *this; }

    bool is_integer() const { return den == 1; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    /// "3", "-1/2"
    std::string to_string() const;

    /// Decimal form with the fewest digits when one exists ("0.25", "-3"),
    /// falling back to "n/d". This is what source-level literals print as.
    std::string to_literal_string() const;

    /// Fixed-point rendering with exactly `digits` fractional digits.
    /// Requires the value to be representable at that precision.
    std::string to_decimal_string(int digits) const;

    /// Integer k such that *this == k * 10^-digits, if representable.
    std::optional<long long> scaled(int digits) const;
};

/// Parses "12", "-0.25", "3/4". Returns nullopt on malformed input.
std::optional<Rational> parse_rational(const std::string& text);

} // namespace abmtk
