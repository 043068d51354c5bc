#pragma once

#include <vector>

#include "fluctsim/generator.hpp"

namespace fluctsim {

struct CovarianceCurve {
    std::vector<double> t;
    std::vector<double> value;
};

// Predicted time-lagged covariance of the fluctuation field,
//   Cov(zeta_0(g), zeta_t(h)) = h . exp(t B) g,
// in coordinates where the stationary covariance is the identity. g and h are
// coefficient vectors on the generator's basis. t = 0 returns the plain
// coefficient inner product; positive times go through the dense matrix
// exponential. The grid must be nonnegative and strictly increasing.
CovarianceCurve propagate_covariance(const GeneratorMatrix& gen, const std::vector<double>& g,
                                     const std::vector<double>& h,
                                     const std::vector<double>& t_grid);

// Same curve by fixed-step Runge-Kutta integration of u' = B u; independent
// of the matrix-exponential path, used to cross-check it to 1e-8.
CovarianceCurve propagate_covariance_rk4(const GeneratorMatrix& gen, const std::vector<double>& g,
                                         const std::vector<double>& h,
                                         const std::vector<double>& t_grid,
                                         double dt_max = 2e-4);

void write_curve_csv(std::ostream& os, const CovarianceCurve& curve);

}  // namespace fluctsim
