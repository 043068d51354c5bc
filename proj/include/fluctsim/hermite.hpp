#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "fluctsim/vec.hpp"

namespace fluctsim {

// Upper bound on per-component Hermite degree accepted by basis code; keeps
// evaluation tables on the stack.
inline constexpr int kMaxHermiteDegree = 32;

// Probabilists' Hermite polynomials normalized in L^2 of the standard
// Gaussian: hhat_n = He_n / sqrt(n!). The three-term recurrence is run in
// normalized form, hhat_{n+1} = (v hhat_n - sqrt(n) hhat_{n-1}) / sqrt(n+1),
// which is stable and gives the ladder identity
//   v hhat_n = sqrt(n+1) hhat_{n+1} + sqrt(n) hhat_{n-1}
// used by the exact transport couplings.
inline double hermite_normalized(int n, double v) {
    if (n == 0) return 1.0;
    double hm = 1.0, h = v;
    for (int k = 1; k < n; ++k) {
        double hp = (v * h - std::sqrt(double(k)) * hm) / std::sqrt(double(k + 1));
        hm = h;
        h = hp;
    }
    return h;
}

// Values hhat_0..hhat_n at one point, for basis evaluation loops.
inline void hermite_normalized_all(int n, double v, double* out) {
    out[0] = 1.0;
    if (n == 0) return;
    out[1] = v;
    for (int k = 1; k < n; ++k)
        out[k + 1] = (v * out[k] - std::sqrt(double(k)) * out[k - 1]) / std::sqrt(double(k + 1));
}

using MultiIndex = std::array<int, 3>;

inline int multi_degree(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

// Product hhat_{a_1}(v_1) ... hhat_{a_d}(v_d).
inline double hermite_multi(const MultiIndex& a, const Vec& v, int d) {
    double p = 1.0;
    for (int i = 0; i < d; ++i)
        if (a[i] != 0) p *= hermite_normalized(a[i], v[i]);
    return p;
}

// All multi-indices with |alpha| <= max_degree, graded (by degree, then
// lexicographic). The ordering is part of the basis contract.
inline std::vector<MultiIndex> hermite_multi_indices(int d, int max_degree) {
    std::vector<MultiIndex> out;
    for (int deg = 0; deg <= max_degree; ++deg) {
        if (d == 2) {
            for (int a0 = deg; a0 >= 0; --a0) out.push_back({a0, deg - a0, 0});
        } else {
            for (int a0 = deg; a0 >= 0; --a0)
                for (int a1 = deg - a0; a1 >= 0; --a1) out.push_back({a0, a1, deg - a0 - a1});
        }
    }
    return out;
}

}  // namespace fluctsim
