#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluctsim/state.hpp"
#include "fluctsim/test_function.hpp"

namespace fluctsim {

struct FieldSample {
    std::string test_id;
    double time = 0.0;
    double raw = 0.0;  // un-centered empirical average, (1/mu) sum h(z_i)
};

// One-particle empirical field: (1/mu_eps) sum_i h(z_i).
double empirical_field(const SystemState& s, const TestFunction& h);

// m-particle empirical field over distinct index tuples,
//   (1/mu^m) sum_{i_1 != ... != i_m} h_1(z_{i_1}) ... h_m(z_{i_m}),
// evaluated through power sums and the set-partition inclusion-exclusion
// formula (no O(N^m) loops). factors.size() = m <= 3.
double m_particle_field(const SystemState& s, const std::vector<TestFunction>& factors);

// Reference evaluation by direct enumeration of distinct tuples; O(N^m),
// intended for cross-checks against the power-sum path.
double m_particle_field_enumerated(const SystemState& s, const std::vector<TestFunction>& factors);

// sqrt(mu) * (raw - centering). Centering is the ensemble mean of raw in
// production; the closed-form equilibrium mean is available as a diagnostic
// (maxwellian_mean in test_function.hpp).
inline double fluctuation_field(double raw, double centering, double mu_eps) {
    return std::sqrt(mu_eps) * (raw - centering);
}

// One factor of the product of centered multi-particle fields: a tensor
// product of single-particle functions plus the ensemble estimate of its
// uncentered mean E[pi_m(h)].
struct OstarFactor {
    std::vector<TestFunction> h;  // m_i single-particle factors, m_i >= 1
    double centering = 0.0;
};

// Centered product over a block of factors B:
//   mu^{|B|/2} sum_{A subset B} pi_{M_A}(tensor of A) prod_{j not in A}(-E_j),
// with M_A the total factor count of A. |B| <= 3 and sum m_i <= 6.
double ostar_product(const SystemState& s, const std::vector<OstarFactor>& factors);

// ---- ensemble moment statistics -------------------------------------------

// Raw field samples across an ensemble: raw[run][slot], one slot per
// (test function, sample time) pair. Fluctuation fields are formed with
// ensemble centering; every derived statistic gets a jackknife standard error
// (leave-one-run-out, which also re-centers).
struct MomentData {
    double mu_eps = 0.0;
    std::vector<std::string> slot_ids;
    std::vector<double> slot_times;
    std::vector<std::vector<double>> raw;

    int n_runs() const { return int(raw.size()); }
    int n_slots() const { return int(slot_ids.size()); }
};

struct MomentEstimate {
    std::vector<int> slots;  // P slot indices, repeats allowed, P in {2,3,4}
    double estimate = 0.0;
    double std_error = 0.0;
    // P=3: 0; P=4: Wick sum of the three pairings of ensemble covariances.
    std::optional<double> prediction;
    double deviation_std_error = 0.0;  // jackknife error of estimate - prediction
    double z_score = 0.0;
};

struct CovarianceEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double correlation = 0.0;
    double fisher_lo = 0.0, fisher_hi = 0.0;  // 95% Fisher-z interval
};

// Ensemble covariance of two fluctuation-field slots.
CovarianceEstimate covariance_estimate(const MomentData& data, int a, int b);

// Product moment E[zeta_{s_1} ... zeta_{s_P}], P <= 4, with Wick / zero
// predictions and the z-score of the deviation. Requires n_runs >= 100.
MomentEstimate estimate_product_moment(const MomentData& data, const std::vector<int>& slots);

struct ShapeEstimate {
    double skewness = 0.0, skewness_se = 0.0;
    double excess_kurtosis = 0.0, kurtosis_se = 0.0;
};

ShapeEstimate estimate_shape(const MomentData& data, int slot);

void write_moments_csv(std::ostream& os, const MomentData& data,
                       const std::vector<MomentEstimate>& rows);

}  // namespace fluctsim
