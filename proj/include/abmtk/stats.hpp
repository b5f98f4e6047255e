#pragma once

#include <cstdint>
#include <vector>

namespace abmtk {

struct Interval {
    double lo = 0;
    double hi = 0;

    bool contains(double x) const { return lo <= x && x <= hi; }
    bool excludes_zero() const { return lo > 0 || hi < 0; }
};

// Wilson score interval at 95% confidence. Unlike the normal approximation
// it stays inside [0,1] and behaves sensibly at 0/n and n/n.
Interval wilson95(uint64_t successes, uint64_t n);

// Pearson correlation with a Fisher-z 95% confidence interval
// (se = 1/sqrt(n-3)). defined is false when either vector is constant,
// in which case r and ci are meaningless; callers should report the pair
// as indeterminate rather than failed.
struct Correlation {
    bool defined = false;
    double r = 0;
    Interval ci;
    long long n = 0;
};

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y);

} // namespace abmtk
