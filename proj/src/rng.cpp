#include "abmtk/rng.hpp"

#include "abmtk/diagnostics.hpp"

namespace abmtk {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t derive_run_seed(uint64_t base_seed, uint64_t run_index) {
    return splitmix64(base_seed + 0x9E3779B97F4A7C15ULL * (run_index + 1));
}

uint64_t RandomStream::uniform_below(uint64_t n) {
    if (n == 0) throw RuntimeError("uniform_below(0)");
    if (n == 1) return 0;
    // Reject draws from the incomplete block at the top of the 64-bit range.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r < limit) return r % n;
    }
}

bool RandomStream::bernoulli(const Rational& p) {
    if (p.num <= 0) {
        next_u64();
        return false;
    }
    if (p.num >= p.den) {
        next_u64();
        return true;
    }
    // threshold = floor(2^64 * num / den); draw < threshold has probability
    // num/den up to 2^-64, and exactly num/den when den divides 2^64.
    unsigned __int128 threshold =
        (static_cast<unsigned __int128>(p.num) << 64) / static_cast<unsigned __int128>(p.den);
    return static_cast<unsigned __int128>(next_u64()) < threshold;
}

std::vector<int> RandomStream::permutation(int n) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(uniform_below(static_cast<uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

} // namespace abmtk
