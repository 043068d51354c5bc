#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "fluctsim/generator.hpp"

namespace fluctsim {

// Euler-Maruyama simulation of the linear Langevin system
//   dX = B X dt + sqrt(C) dW,
// started from the standard Gaussian (its stationary law when the Lyapunov
// identity holds). States are recorded every record_dt time units; the
// stationary covariance and the requested lagged covariances are averaged
// over the recorded grid per path, then across paths, giving per-entry
// standard errors from the path-to-path scatter.
struct OUOptions {
    double dt = 0.0;              // step; must satisfy dt <= 0.1 / |B|
    double t_end = 0.0;
    int n_paths = 0;
    double record_dt = 0.25;      // state-recording period, a multiple of dt
    std::vector<double> lag_times;  // multiples of record_dt, each <= t_end/2
    int keep_paths = 0;           // number of recorded trajectories to return
};

struct OUResult {
    Eigen::MatrixXd stationary_cov;
    Eigen::MatrixXd stationary_se;
    std::vector<double> lag_times;
    std::vector<Eigen::MatrixXd> lagged_cov;
    std::vector<Eigen::MatrixXd> lagged_se;
    double dt = 0.0;
    double record_dt = 0.0;
    std::int64_t n_steps = 0;   // per path
    int n_recorded = 0;         // states on the recording grid per path
    int n_paths = 0;
    double b_norm = 0.0;        // sqrt(|B|_1 |B|_inf), the step-size gauge
    std::vector<Eigen::MatrixXd> sample_paths;  // keep_paths trajectories, rows = records
};

// Operator-norm gauge used for the step bound.
double generator_norm(const GeneratorMatrix& gen);

// Step size that keeps the Euler-Maruyama stationary law accurate, not just
// stable. An oscillatory mode with frequency omega and damping gamma picks
// up excess variance dt * omega^2 / (2 gamma) per unit, so the step must
// shrink with the square of the stiffness; 0.02 / |B|^2 holds the worst-mode
// inflation below a percent for the bases used here, and the stability
// budget 0.1 / |B| still caps the result.
double accuracy_dt_bound(const GeneratorMatrix& gen);

// Largest dt that divides record_dt evenly while respecting 0.1 / |B|.
double commensurate_dt(double record_dt, double dt_bound);

// Symmetric square root of C after projecting small negative eigenvalues
// (within 3x the Monte Carlo operator-norm error) to zero. Noise estimates
// that are negative beyond that tolerance abort.
Eigen::MatrixXd noise_sqrt(const NoiseMatrix& noise);

OUResult ou_simulate(const GeneratorMatrix& gen, const NoiseMatrix& noise, const OUOptions& opts,
                     std::uint64_t base_seed, int n_workers = 0);

}  // namespace fluctsim
