#include "abmtk/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace abmtk {

namespace {
// Two-sided 95%: Phi^-1(0.975).
constexpr double kZ95 = 1.959963984540054;
} // namespace

Interval wilson95(uint64_t successes, uint64_t n) {
    if (n == 0 || successes > n)
        throw std::invalid_argument("wilson95: need 0 <= successes <= n, n > 0");
    double nn = static_cast<double>(n);
    double p = static_cast<double>(successes) / nn;
    double z2 = kZ95 * kZ95;
    double denom = 1.0 + z2 / nn;
    double center = (p + z2 / (2.0 * nn)) / denom;
    double half = (kZ95 / denom) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    Interval ci{center - half, center + half};
    if (ci.lo < 0) ci.lo = 0;
    if (ci.hi > 1) ci.hi = 1;
    // At the extremes center and half coincide algebraically; pin the exact
    // endpoint rather than keeping rounding residue.
    if (successes == 0) ci.lo = 0;
    if (successes == n) ci.hi = 1;
    return ci;
}

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("pearson: vectors differ in length");
    Correlation c;
    c.n = static_cast<long long>(x.size());
    if (c.n < 3) return c;
    double n = static_cast<double>(c.n);
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0 || syy == 0) return c; // constant input: correlation undefined
    c.defined = true;
    c.r = sxy / std::sqrt(sxx * syy);
    if (c.r > 1) c.r = 1;
    if (c.r < -1) c.r = -1;
    if (c.r == 1 || c.r == -1) {
        // Perfect linear dependence: the Fisher interval collapses to a
        // point at every n (going through atanh would hit inf - inf when
        // n = 3 makes the standard error infinite too).
        c.ci = {c.r, c.r};
        return c;
    }
    double z = std::atanh(c.r);
    double se = 1.0 / std::sqrt(n - 3.0);
    c.ci = {std::tanh(z - kZ95 * se), std::tanh(z + kZ95 * se)};
    return c;
}

} // namespace abmtk
