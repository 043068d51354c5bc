#pragma once

#include <cmath>
#include <random>

#include "fluctsim/domain.hpp"
#include "fluctsim/vec.hpp"

namespace fluctsim {

// Standard Maxwellian M(v) = (2 pi)^{-d/2} exp(-|v|^2 / 2), the velocity
// marginal of the equilibrium measure. Unit temperature throughout.
inline double maxwellian_density(const Vec& v, int d) {
    double c = std::pow(2.0 * M_PI, -0.5 * d);
    return c * std::exp(-0.5 * norm2(v));
}

inline Vec maxwellian_sample(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec v;
    for (int i = 0; i < d; ++i) v[i] = n(rng);
    return v;
}

inline Vec uniform_position(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x;
    for (int i = 0; i < d; ++i) x[i] = u(rng);
    return x;
}

// Uniform direction on S^{d-1}.
inline Vec uniform_sphere(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    while (true) {
        Vec w;
        for (int i = 0; i < d; ++i) w[i] = n(rng);
        double r2 = norm2(w);
        if (r2 > 1e-24) {
            double inv = 1.0 / std::sqrt(r2);
            return w * inv;
        }
    }
}

// Surface area of S^{d-1}: 2 pi for d=2, 4 pi for d=3.
inline double sphere_area(int d) { return d == 2 ? 2.0 * M_PI : 4.0 * M_PI; }

}  // namespace fluctsim
