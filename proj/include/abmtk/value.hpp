#pragma once

#include "abmtk/rational.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace abmtk {

/// Runtime value: boolean or exact numeric.
struct Value {
    bool boolean = false;
    bool flag = false; // value when boolean
    Rational number;   // value when !boolean

    static Value of_bool(bool b) { Value v; v.boolean = true; v.flag = b; return v; }
    static Value of_number(Rational r) { Value v; v.number = r; return v; }
    static Value of_int(long long n) { return of_number(Rational(n)); }

    bool operator==(const Value& o) const {
        if (boolean != o.boolean) return false;
        return boolean ? flag == o.flag : number == o.number;
    }
    bool operator!=(const Value& o) const { return !(*this == o); }

    /// Source-level literal form: true/false, or decimal-preferred numeric.
    std::string to_string() const {
        return boolean ? (flag ? "true" : "false") : number.to_literal_string();
    }
};

/// The set of values a variable or parameter may take. Domains are finite by
/// construction: booleans, bounded integers, or decimals quantized to a fixed
/// number of fractional digits.
struct ValueDomain {
    enum class Kind { Boolean, IntRange, Decimal };

    Kind kind = Kind::Boolean;
    Rational lo;
    Rational hi;
    int digits = 0; // Decimal only

    static ValueDomain boolean() { return ValueDomain{}; }
    static ValueDomain int_range(long long lo, long long hi);
    static ValueDomain decimal(Rational lo, Rational hi, int digits);

    bool contains(const Value& v) const;

    /// Number of representable values; nullopt when it does not fit in u64.
    std::optional<unsigned long long> cardinality() const;

    /// index-th representable value, counting from lo.
    Value value_at(unsigned long long index) const;

    /// Rendering used by the bit-exact trace/table formats: booleans as
    /// true/false, integers plain, decimals with exactly `digits` digits.
    std::string render(const Value& v) const;

    std::string describe() const; // "bool", "int[0,5]", "dec[0,1]@2"

    bool operator==(const ValueDomain& o) const {
        return kind == o.kind && lo == o.lo && hi == o.hi && digits == o.digits;
    }
};

} // namespace abmtk
