#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "fluctsim/basis.hpp"
#include "fluctsim/domain.hpp"

namespace fluctsim {

// Weak-form generator of the linearized dynamics on a GalerkinBasis:
// B[k,l] = <phi_k, L phi_l> in the Maxwellian-weighted inner product. The
// transport block is assembled in closed form (exactly antisymmetric); the
// collision block is a Monte Carlo quadrature acting on the velocity factors
// only, so it carries a per-entry standard error. The collision estimator is
// symmetric by construction: mc_error entries at (k,l) and (l,k) describe
// one and the same random quantity, not independent ones.
struct GeneratorMatrix {
    Eigen::MatrixXd B;
    Eigen::MatrixXd mc_error;
    std::int64_t n_mc = 0;
    int dim = 0;
    int fourier_cutoff = 0;
    int hermite_cutoff = 0;
};

// Noise covariance on the same basis: C[k,l] = 1/2 E[w * dphi_k * dphi_l]
// over contact configurations, with dphi the four-point collision difference.
// Collisions leave positions untouched, so C is block diagonal across
// spatial modes exactly.
struct NoiseMatrix {
    Eigen::MatrixXd C;
    Eigen::MatrixXd mc_error;
    std::int64_t n_mc = 0;
    int dim = 0;
    int fourier_cutoff = 0;
    int hermite_cutoff = 0;
};

// Exact transport couplings alone (antisymmetric on the nose).
Eigen::MatrixXd transport_matrix(const GalerkinBasis& basis);

GeneratorMatrix assemble_generator(const GalerkinBasis& basis, std::int64_t n_mc,
                                   std::uint64_t base_seed, int n_workers = 0);
NoiseMatrix assemble_noise(const GalerkinBasis& basis, std::int64_t n_mc, std::uint64_t base_seed,
                           int n_workers = 0);

// Lyapunov residual R = B + B^T + C. Entries with Monte Carlo content are
// scored as |R| over the combined standard error (the B and B^T errors add
// linearly, matching the symmetric estimator); entries assembled in closed
// form must vanish to round-off.
struct FdReport {
    double max_residual = 0.0;        // over MC entries
    double max_z = 0.0;               // residual / combined error, MC entries
    double max_exact_residual = 0.0;  // entries with no MC content
    int n_mc_entries = 0;
    bool pass = false;
    std::string detail;
};
FdReport fd_check(const GeneratorMatrix& gen, const NoiseMatrix& noise);

// Largest eigenvalue of the symmetric part of B; dissipativity demands it
// stay within Monte Carlo noise of zero. The tolerance is an operator-norm
// bound on the entrywise 3-sigma error matrix.
struct DissipativityReport {
    double max_sym_eigenvalue = 0.0;
    double tol = 0.0;
    bool pass = false;
};
DissipativityReport dissipativity_check(const GeneratorMatrix& gen);

// Stationarity of the Maxwellian under the two-particle collision operator,
// tested one basis function at a time: gain and loss integrals estimated by
// Monte Carlo and compared. With shared_stream the same draws feed both
// integrals and the residual collapses to floating-point noise; otherwise
// the streams are independent and the comparison is a genuine two-quadrature
// cross-check. Spatial modes other than the constant integrate to zero over
// the torus and are reported as exact zeros.
struct BalanceEntry {
    std::string label;
    double gain = 0.0;
    double loss = 0.0;
    double gain_se = 0.0;
    double loss_se = 0.0;
    double residual = 0.0;
    double combined_se = 0.0;
    double z = 0.0;
    bool exact_zero = false;
};
struct BalanceReport {
    std::vector<BalanceEntry> entries;
    double max_abs_z = 0.0;
    double max_abs_residual = 0.0;  // over exact-zero-free entries
    bool pass = false;
    std::int64_t n_mc = 0;
    bool shared_stream = false;
};
BalanceReport equilibrium_balance(const GalerkinBasis& basis, const DomainParams& dom,
                                  std::int64_t n_mc, std::uint64_t base_seed,
                                  bool shared_stream = false, int n_workers = 0);

// Gain/loss evaluation for a single test function (same estimator as the
// basis-wide report); used by tests on invariants.
BalanceEntry equilibrium_balance_single(const TestFunction& tf, const DomainParams& dom,
                                        std::int64_t n_mc, std::uint64_t base_seed,
                                        bool shared_stream = false);

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);
std::string matrix_header_json(const std::string& kind, const GalerkinBasis& basis,
                               std::int64_t n_mc, double max_mc_error);

}  // namespace fluctsim
