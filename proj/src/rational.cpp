#include "abmtk/rational.hpp"

#include "abmtk/diagnostics.hpp"

#include <cstdlib>
#include <numeric>

namespace abmtk {

namespace {

using Wide = __int128;

long long narrow(Wide v, const char* what) {
    if (v > Wide(INT64_MAX) || v < Wide(INT64_MIN))
        throw RuntimeError(std::string("numeric overflow in ") + what);
    return static_cast<long long>(v);
}

Rational reduce(Wide n, Wide d, const char* what) {
    if (d == 0) throw RuntimeError("division by zero");
    if (d < 0) { n = -n; d = -d; }
    Wide a = n < 0 ? -n : n;
    Wide b = d;
    while (b != 0) { Wide t = a % b; a = b; b = t; }
    if (a > 1) { n /= a; d /= a; }
    Rational r;
    r.num = narrow(n, what);
    r.den = narrow(d, what);
    return r;
}

} // namespace

Rational::Rational(long long n, long long d) {
    Rational r = reduce(Wide(n), Wide(d), "rational");
    num = r.num;
    den = r.den;
}

Rational Rational::from_decimal(long long scaled, int digits) {
    Wide d = 1;
    for (int i = 0; i < digits; ++i) d *= 10;
    return reduce(Wide(scaled), d, "decimal literal");
}

Rational Rational::operator+(const Rational& o) const {
    return reduce(Wide(num) * o.den + Wide(o.num) * den, Wide(den) * o.den, "addition");
}

Rational Rational::operator-(const Rational& o) const {
    return reduce(Wide(num) * o.den - Wide(o.num) * den, Wide(den) * o.den, "subtraction");
}

Rational Rational::operator*(const Rational& o) const {
    return reduce(Wide(num) * o.num, Wide(den) * o.den, "multiplication");
}

Rational Rational::operator/(const Rational& o) const {
    return reduce(Wide(num) * o.den, Wide(den) * o.num, "division");
}

bool Rational::operator<(const Rational& o) const {
    return Wide(num) * o.den < Wide(o.num) * den;
}

std::string Rational::to_string() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

std::string Rational::to_literal_string() const {
    if (den == 1) return std::to_string(num);
    for (int d = 1; d <= 18; ++d)
        if (scaled(d)) return to_decimal_string(d);
    return to_string();
}

std::optional<long long> Rational::scaled(int digits) const {
    Wide p = 1;
    for (int i = 0; i < digits; ++i) p *= 10;
    Wide t = Wide(num) * p;
    if (t % den != 0) return std::nullopt;
    Wide s = t / den;
    if (s > Wide(INT64_MAX) || s < Wide(INT64_MIN)) return std::nullopt;
    return static_cast<long long>(s);
}

std::string Rational::to_decimal_string(int digits) const {
    auto s = scaled(digits);
    if (!s) throw RuntimeError("value " + to_string() + " not representable at precision " + std::to_string(digits));
    long long v = *s;
    bool neg = v < 0;
    unsigned long long mag = neg ? 0ULL - static_cast<unsigned long long>(v) : static_cast<unsigned long long>(v);
    unsigned long long p = 1;
    for (int i = 0; i < digits; ++i) p *= 10;
    std::string out = neg ? "-" : "";
    out += std::to_string(mag / p);
    if (digits > 0) {
        std::string frac = std::to_string(mag % p);
        out += "." + std::string(digits - frac.size(), '0') + frac;
    }
    return out;
}

std::optional<Rational> parse_rational(const std::string& text) {
    if (text.empty()) return std::nullopt;
    size_t slash = text.find('/');
    if (slash != std::string::npos) {
        auto a = parse_rational(text.substr(0, slash));
        auto b = parse_rational(text.substr(slash + 1));
        if (!a || !b || !a->is_integer() || !b->is_integer() || b->num == 0) return std::nullopt;
        return Rational(a->num, b->num);
    }
    size_t i = 0;
    bool neg = false;
    if (text[i] == '-' || text[i] == '+') { neg = text[i] == '-'; ++i; }
    if (i >= text.size() || !isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
    long long whole = 0;
    while (i < text.size() && isdigit(static_cast<unsigned char>(text[i]))) {
        if (whole > (INT64_MAX - 9) / 10) return std::nullopt;
        whole = whole * 10 + (text[i] - '0');
        ++i;
    }
    int digits = 0;
    long long frac = 0;
    if (i < text.size() && text[i] == '.') {
        ++i;
        if (i >= text.size() || !isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
        while (i < text.size() && isdigit(static_cast<unsigned char>(text[i]))) {
            if (digits >= 18) return std::nullopt;
            frac = frac * 10 + (text[i] - '0');
            ++digits;
            ++i;
        }
    }
    if (i != text.size()) return std::nullopt;
    __int128 p = 1;
    for (int k = 0; k < digits; ++k) p *= 10;
    __int128 scaled = __int128(whole) * p + frac;
    if (scaled > INT64_MAX) return std::nullopt;
    long long s = static_cast<long long>(scaled);
    if (neg) s = -s;
    return Rational::from_decimal(s, digits);
}

std::string format_diagnostics(const Diagnostics& diags) {
    std::string out;
    for (const auto& d : diags) {
        if (d.line > 0) out += std::to_string(d.line) + ":" + std::to_string(d.col) + ": ";
        out += d.message + "\n";
    }
    return out;
}

} // namespace abmtk
