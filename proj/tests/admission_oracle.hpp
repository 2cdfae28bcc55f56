#pragma once

// Independent admission check over exact GMP rationals. Deliberately avoids
// the library's bound computation: instead of comparing against
// n(2^(1/n) - 1), it tests the equivalent (lhs/n + 1)^n <= 2.

#include <gmpxx.h>

#include <cstdint>
#include <vector>

namespace oracle {

struct Vcpu {
    bool main;
    std::int64_t a;  ///< C for a main VCPU, numerator of U otherwise
    std::int64_t b;  ///< T for a main VCPU, denominator of U otherwise
};

inline mpq_class lhs(const std::vector<Vcpu>& set)
{
    mpq_class sum = 0;
    for (const auto& v : set) {
        mpq_class q(static_cast<long>(v.a), static_cast<long>(v.b));
        q.canonicalize();
        sum += v.main ? q : mpq_class((2 - q) * q);
    }
    return sum;
}

inline bool admits(const std::vector<Vcpu>& set)
{
    int n = 0;
    for (const auto& v : set)
        n += v.main ? 1 : 0;
    const mpq_class l = lhs(set);
    if (n == 0)
        return l <= 1;
    mpq_class x = l / n + 1;
    mpq_class p = 1;
    for (int i = 0; i < n; ++i)
        p *= x;
    return p <= 2;
}

}  // namespace oracle
