#include "abmtk/value.hpp"

#include "abmtk/diagnostics.hpp"

namespace abmtk {

ValueDomain ValueDomain::int_range(long long lo, long long hi) {
    ValueDomain d;
    d.kind = Kind::IntRange;
    d.lo = Rational(lo);
    d.hi = Rational(hi);
    return d;
}

ValueDomain ValueDomain::decimal(Rational lo, Rational hi, int digits) {
    ValueDomain d;
    d.kind = Kind::Decimal;
    d.lo = lo;
    d.hi = hi;
    d.digits = digits;
    return d;
}

bool ValueDomain::contains(const Value& v) const {
    switch (kind) {
    case Kind::Boolean:
        return v.boolean;
    case Kind::IntRange:
        return !v.boolean && v.number.is_integer() && lo <= v.number && v.number <= hi;
    case Kind::Decimal:
        return !v.boolean && v.number.scaled(digits).has_value() && lo <= v.number && v.number <= hi;
    }
    return false;
}

std::optional<unsigned long long> ValueDomain::cardinality() const {
    if (kind == Kind::Boolean) return 2ULL;
    int d = kind == Kind::Decimal ? digits : 0;
    auto slo = lo.scaled(d);
    auto shi = hi.scaled(d);
    if (!slo || !shi) return std::nullopt;
    unsigned __int128 count = static_cast<unsigned __int128>(*shi - *slo) + 1;
    if (count > UINT64_MAX) return std::nullopt;
    return static_cast<unsigned long long>(count);
}

Value ValueDomain::value_at(unsigned long long index) const {
    if (kind == Kind::Boolean) return Value::of_bool(index != 0);
    int d = kind == Kind::Decimal ? digits : 0;
    long long base = *lo.scaled(d);
    return Value::of_number(Rational::from_decimal(base + static_cast<long long>(index), d));
}

std::string ValueDomain::render(const Value& v) const {
    if (kind == Kind::Boolean) return v.flag ? "true" : "false";
    if (kind == Kind::IntRange) return v.number.to_string();
    return v.number.to_decimal_string(digits);
}

std::string ValueDomain::describe() const {
    switch (kind) {
    case Kind::Boolean:
        return "bool";
    case Kind::IntRange:
        return "int[" + lo.to_string() + "," + hi.to_string() + "]";
    case Kind::Decimal:
        return "dec[" + lo.to_decimal_string(digits) + "," + hi.to_decimal_string(digits) + "]@" +
               std::to_string(digits);
    }
    return "?";
}

} // namespace abmtk
