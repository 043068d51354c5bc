#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fluctsim/domain.hpp"
#include "fluctsim/fields.hpp"
#include "fluctsim/sampler.hpp"
#include "fluctsim/test_function.hpp"

namespace fluctsim {

struct AnalysisFlags {
    bool covariance = false;
    bool wick = false;
    bool fd_check = false;
    bool ou = false;
    bool clusters = false;
    bool balance = false;
};

// Shared by the fd_check, ou and balance analyses.
struct GalerkinSection {
    int fourier_cutoff = 1;
    int hermite_cutoff = 2;
    long long n_mc = 1000000;
};

struct OUSection {
    double t_end = 32.0;
    int n_paths = 64;
    double record_dt = 0.25;
    std::vector<double> lag_times{0.25, 0.5, 1.0};
};

struct ClusterSection {
    std::vector<double> eps_values;  // defaults to the domain eps
    std::vector<double> thetas{1.0};
    int k_max = 1;
    int r_max = 1;
    double tau = 0.125;
    double horizon = 1.0;
    double radius_scale = 1.0;
    bool strict = false;
    int n_runs = 1000;
};

struct ExperimentConfig {
    DomainParams domain;
    SamplerConfig sampler;
    std::vector<double> t_samples{0.0};
    std::vector<TestFunction> test_functions;
    long n_runs = 1;
    std::uint64_t base_seed = 1;
    AnalysisFlags analyses;
    GalerkinSection galerkin;
    OUSection ou;
    ClusterSection clusters;
    std::string output_dir = "out";
    int workers = 0;        // 0 = FLUCTSIM_WORKERS or serial
    std::string raw_text;   // verbatim config, hashed into the manifest
};

// Parses and validates the JSON config; errors name the offending field.
ExperimentConfig parse_experiment_config(const std::string& json_text);

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    // Subcommands re-run a single analysis against a stored config by
    // overriding the flags; skip_ensemble drops the sampling stage for
    // analyses that never touch ensemble data.
    std::optional<AnalysisFlags> analyses;
    bool skip_ensemble = false;
};

// Full pipeline: sample the ensemble, advance to the sample times, evaluate
// the fields, run the requested analyses, and write artifacts + manifest
// into the output directory. Returns the process exit status; failures are
// reported on `err` with the failing analysis or config field named.
int run_experiment(const std::string& config_path, const RunOverrides& ov, std::ostream& log,
                   std::ostream& err);

// Ensemble raw-field matrix (one row per run, one slot per test function and
// sample time). When run0_snapshots is given, run 0 writes a snapshot at
// every sample time into it. Deterministic in base_seed, independent of the
// worker count.
MomentData collect_ensemble(const ExperimentConfig& cfg, std::string* run0_snapshots = nullptr);

}  // namespace fluctsim
