#pragma once

#include <random>
#include <string>

#include "fluctsim/state.hpp"

namespace fluctsim {

// Equilibrium sampler for the grand-canonical hard-sphere measure: particle
// number Poisson(mu_eps) reweighted by the no-overlap indicator, positions
// uniform on the torus, velocities Maxwellian.
struct SamplerConfig {
    enum Mode { exact_rejection, birth_death } mode = exact_rejection;
    long max_attempts = 2000;    // exact_rejection: proposals before giving up
    long burn_in_sweeps = -1;    // birth_death: elementary MCMC steps; -1 = default
    // Default burn-in is the documented mixing heuristic, 100 steps per unit of
    // expected particle number.
    long effective_burn_in(double mu_eps) const {
        long floor_steps = 100L * (long)std::ceil(mu_eps);
        return burn_in_sweeps < 0 ? floor_steps : burn_in_sweeps;
    }
};

struct SamplerDiagnostics {
    long attempts = 0;          // exact_rejection: proposals consumed
    long mcmc_steps = 0;        // birth_death: steps taken
    long births = 0, deaths = 0, moves = 0;  // accepted counts
    int n_particles = 0;
};

// Draw one equilibrium configuration. Throws std::runtime_error if the
// rejection budget runs out (the message advises birth_death mode, which is
// the right tool once exp(-expected overlap count) gets small).
SystemState sample_configuration(const DomainParams& dom, const SamplerConfig& cfg,
                                 std::mt19937_64& rng, SamplerDiagnostics* diag = nullptr);

// Validates the burn-in floor for birth_death configs.
void validate_sampler_config(const SamplerConfig& cfg, const DomainParams& dom);

struct MeanCountReport {
    double empirical_mean = 0.0;
    double mu_eps = 0.0;
    double ratio = 0.0;
    double std_error = 0.0;
    double c_bound = 0.0;  // depletion constant C in the [1 - C eps, 1] window
    bool pass = false;
    std::string detail;
};

// Ensemble check that E[N] sits in [1 - C eps, 1] * mu_eps (hard-core
// depletion pushes the mean slightly below the Poisson value). The window is
// widened by 3 standard errors on the statistical side.
MeanCountReport mean_count_check(const DomainParams& dom, const SamplerConfig& cfg, long n_draws,
                                 std::mt19937_64& rng);

}  // namespace fluctsim
