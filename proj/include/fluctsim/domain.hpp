#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "fluctsim/ddouble.hpp"
#include "fluctsim/vec.hpp"

namespace fluctsim {

// Unit torus [0,1)^d with hard spheres of diameter eps. The scaling factor
// mu_eps = eps^{-(d-1)} ties the expected particle number to the sphere
// diameter so that the mean free path stays of order one.
struct DomainParams {
    int d = 2;
    double eps = 1e-3;
    double mu_eps = 1e3;

    DomainParams() = default;
    DomainParams(int dim, double diameter) : d(dim), eps(diameter) {
        if (d != 2 && d != 3)
            throw std::invalid_argument("DomainParams: d must be 2 or 3, got " + std::to_string(d));
        if (!(eps > 0.0) || !(eps < 0.25))
            throw std::invalid_argument("DomainParams: eps must lie in (0, 0.25), got " +
                                        std::to_string(eps));
        // Computed as a plain reciprocal (not pow) so mu_eps is the exact
        // rounding of eps^{-(d-1)}.
        mu_eps = d == 2 ? 1.0 / eps : 1.0 / (eps * eps);
    }
};

struct Particle {
    Vec x;  // position in [0,1)^d
    Vec v;  // velocity in R^d
};

// Wrap a coordinate into [0,1). The subtraction of the integer part is exact
// for the magnitudes that occur here; the final guards catch the one rounding
// case where x just below an integer lands on 1.0.
template <class R>
inline R wrap_unit(R x) {
    x = x - sc_floor(x);
    if (x >= R(1)) x -= R(1);
    if (x < R(0)) x += R(0) + R(1);
    return x;
}

template <class R>
inline void wrap_unit_vec(VecT<R>& x, int d) {
    for (int i = 0; i < d; ++i) x[i] = wrap_unit(x[i]);
}

// Minimum-image displacement a - b with every coordinate in [-0.5, 0.5).
template <class R>
inline VecT<R> torus_displacement(const VecT<R>& a, const VecT<R>& b, int d) {
    VecT<R> w;
    for (int i = 0; i < d; ++i) {
        R t = a[i] - b[i];
        t = t - sc_floor(t + R(0.5));
        if (t >= R(0.5)) t -= R(1);  // rounding guard, keeps the half-open convention
        w[i] = t;
    }
    return w;
}

inline double torus_distance(const Vec& a, const Vec& b, int d) {
    return std::sqrt(norm2(torus_displacement(a, b, d)));
}

}  // namespace fluctsim
