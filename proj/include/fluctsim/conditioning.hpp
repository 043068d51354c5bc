#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fluctsim/sampler.hpp"
#include "fluctsim/state.hpp"

namespace fluctsim {

// Parameters of the good-configuration event: along a grid of sample times,
// every proximity cluster at radius 3 sqrt(gamma) V delta has size <= gamma
// and every speed stays <= V. The defaults tie gamma, V and delta to eps;
// the scale separation they assume (eps well below delta below tau below the
// horizon) only kicks in at vanishing eps, so strict mode rejects parameter
// sets that break the ordering while diagnostic mode records the violations
// and carries on. radius_scale shrinks the proximity radius for trend
// studies at simulable eps, where the nominal radius is comparable to the
// whole box.
struct ConditioningParams {
    int gamma = 8;
    double speed_cap = 0.0;  // V
    double delta = 0.0;
    double tau = 0.0;
    double horizon = 0.0;  // Theta
    double radius_scale = 1.0;
    bool strict = true;

    double radius() const { return 3.0 * std::sqrt(double(gamma)) * speed_cap * delta * radius_scale; }
};

// gamma = 4d, V = |log eps|, delta = eps^{1 - 1/(2d)}.
ConditioningParams conditioning_defaults(const DomainParams& dom, double tau, double horizon);

// Violations of eps < delta/10 < tau/100 < 0.01 * horizon, plus basic
// positivity. Empty means the scale ordering holds.
std::vector<std::string> conditioning_violations(const ConditioningParams& p, double eps);

// Throws in strict mode if the ordering fails; returns the violation list.
std::vector<std::string> validate_conditioning(const ConditioningParams& p, double eps);

// Sample times theta_p - (k-1) tau - r delta for k = 1..k_max, r = 0..r_max,
// clipped to nonnegative, sorted, deduplicated.
std::vector<double> derive_sample_grid(const ConditioningParams& p,
                                       const std::vector<double>& thetas, int k_max, int r_max);

struct ClusterSample {
    double time = 0.0;
    int max_cluster_size = 0;
    std::vector<int> size_histogram;  // index s = number of clusters of size s
    double max_speed = 0.0;
    bool upsilon_ok = false;
    bool truncated = false;  // early exit fired before the full histogram
};

struct ClusterReport {
    std::vector<ClusterSample> samples;
    bool upsilon_ok = false;  // conjunction over samples
};

// Union-find over the proximity graph at one instant. With early_exit the
// scan stops as soon as a cluster exceeds gamma or a speed exceeds V; the
// histogram is then marked truncated.
ClusterSample detect_microscopic_clusters(const SystemState& s, const ConditioningParams& p,
                                          bool early_exit = false);

ClusterReport evaluate_upsilon(SystemState state, const ConditioningParams& p,
                               const std::vector<double>& grid, bool early_exit = true);

struct WilsonInterval {
    double lo = 0.0, hi = 0.0;
};
WilsonInterval wilson_interval(int successes, int n);

struct UpsilonScanConfig {
    std::vector<double> thetas;
    int k_max = 1;
    int r_max = 1;
    double tau = 0.0;
    double horizon = 0.0;
    double radius_scale = 1.0;
    bool strict = false;  // scans at simulable eps live outside the ordering
    int n_runs = 1000;
    SamplerConfig sampler;
};

struct UpsilonScanRow {
    double eps = 0.0;
    int n_runs = 0;
    int n_violations = 0;
    double p_hat = 0.0;
    WilsonInterval ci;
    std::vector<std::string> param_violations;
};

// Empirical frequency of the bad event (not-Upsilon) per eps, each run a
// fresh equilibrium draw advanced through the sample grid.
std::vector<UpsilonScanRow> upsilon_probability_scan(const std::vector<DomainParams>& doms,
                                                     const UpsilonScanConfig& cfg,
                                                     std::uint64_t base_seed);

// Encounter graph over a time window. Edges arrive in time order; an edge
// whose endpoints were already connected closes a cycle (a recollision in
// forward language), otherwise it extends a tree.
struct GraphEdge {
    int i = 0, j = 0;
    double time = 0.0;
    bool cycle = false;
};

struct CollisionGraph {
    double t0 = 0.0, t1 = 0.0;
    std::vector<int> vertices;  // particle ids appearing in the window
    std::vector<GraphEdge> edges;
};

struct GraphSummary {
    int n_tree = 0;
    int n_cycle = 0;
    std::vector<int> component_size_histogram;  // index s = components of size s
    std::vector<int> cycle_counts;              // per involved vertex, aligned with graph.vertices
    int cycle_cap = 0;
    int n_capped = 0;
};

CollisionGraph classify_collision_graph(const std::vector<CollisionEvent>& log, double t0,
                                        double t1);
GraphSummary summarize_collision_graph(const CollisionGraph& g, int cycle_cap = 1000);

void write_cluster_report_jsonl(std::ostream& os, const ClusterReport& rep);
void write_graph_summary_jsonl(std::ostream& os, const CollisionGraph& g, const GraphSummary& s);

}  // namespace fluctsim
