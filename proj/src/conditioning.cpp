#include "fluctsim/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "fluctsim/dynamics.hpp"
#include "fluctsim/rng.hpp"

namespace fluctsim {

ConditioningParams conditioning_defaults(const DomainParams& dom, double tau, double horizon) {
    ConditioningParams p;
    p.gamma = 4 * dom.d;
    p.speed_cap = std::fabs(std::log(dom.eps));
    p.delta = std::pow(dom.eps, 1.0 - 1.0 / (2.0 * dom.d));
    p.tau = tau;
    p.horizon = horizon;
    return p;
}

std::vector<std::string> conditioning_violations(const ConditioningParams& p, double eps) {
    std::vector<std::string> out;
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.4g", v);
        return std::string(b);
    };
    if (p.gamma < 1) out.push_back("gamma must be >= 1");
    if (!(p.speed_cap > 0)) out.push_back("speed cap must be positive");
    if (!(p.delta > 0) || !(p.tau > 0) || !(p.horizon > 0))
        out.push_back("delta, tau and the horizon must be positive");
    if (!(eps < p.delta / 10.0))
        out.push_back("eps " + num(eps) + " not below delta/10 = " + num(p.delta / 10.0));
    if (!(p.delta / 10.0 < p.tau / 100.0))
        out.push_back("delta/10 = " + num(p.delta / 10.0) +
                      " not below tau/100 = " + num(p.tau / 100.0));
    if (!(p.tau / 100.0 < 0.01 * p.horizon))
        out.push_back("tau/100 = " + num(p.tau / 100.0) +
                      " not below horizon/100 = " + num(0.01 * p.horizon));
    return out;
}

std::vector<std::string> validate_conditioning(const ConditioningParams& p, double eps) {
    auto v = conditioning_violations(p, eps);
    if (p.strict && !v.empty()) {
        std::string msg = "conditioning parameters break the scale ordering:";
        for (const auto& s : v) msg += " " + s + ";";
        msg += " use strict = false for diagnostics outside the asymptotic regime";
        throw std::invalid_argument(msg);
    }
    return v;
}

std::vector<double> derive_sample_grid(const ConditioningParams& p,
                                       const std::vector<double>& thetas, int k_max, int r_max) {
    if (k_max < 1 || r_max < 0)
        throw std::invalid_argument("derive_sample_grid: need k_max >= 1, r_max >= 0");
    std::vector<double> g;
    for (double theta : thetas)
        for (int k = 1; k <= k_max; ++k)
            for (int r = 0; r <= r_max; ++r) {
                double t = theta - (k - 1) * p.tau - r * p.delta;
                if (t >= 0.0) g.push_back(t);
            }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

namespace {

struct UnionFind {
    std::vector<int> parent, size;
    explicit UnionFind(int n) : parent(n), size(n, 1) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    // Returns the size of the merged component; a no-op union (same root)
    // returns 0.
    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return 0;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        return size[a];
    }
};

}  // namespace

ClusterSample detect_microscopic_clusters(const SystemState& s, const ConditioningParams& p,
                                          bool early_exit) {
    ClusterSample out;
    out.time = s.time;
    int n = s.n();
    for (const auto& part : s.particles)
        out.max_speed = std::max(out.max_speed, std::sqrt(norm2(part.v)));
    bool speeds_ok = out.max_speed <= p.speed_cap;
    if (early_exit && !speeds_ok) {
        out.upsilon_ok = false;
        out.truncated = true;
        return out;
    }

    double r2 = p.radius() * p.radius();
    UnionFind uf(n);
    int max_size = n > 0 ? 1 : 0;
    for (int i = 0; i < n && !(early_exit && max_size > p.gamma); ++i)
        for (int j = i + 1; j < n; ++j) {
            if (norm2(torus_displacement(s.particles[i].x, s.particles[j].x, s.dom.d)) > r2)
                continue;
            max_size = std::max(max_size, uf.unite(i, j));
            if (early_exit && max_size > p.gamma) {
                out.truncated = true;
                break;
            }
        }
    out.max_cluster_size = max_size;
    out.upsilon_ok = speeds_ok && max_size <= p.gamma;
    if (!out.truncated) {
        out.size_histogram.assign(std::size_t(max_size) + 1, 0);
        for (int i = 0; i < n; ++i)
            if (uf.find(i) == i) ++out.size_histogram[uf.size[i]];
    }
    return out;
}

ClusterReport evaluate_upsilon(SystemState state, const ConditioningParams& p,
                               const std::vector<double>& grid, bool early_exit) {
    ClusterReport rep;
    rep.upsilon_ok = true;
    for (double t : grid) {
        if (t < state.time - 1e-12)
            throw std::invalid_argument("evaluate_upsilon: grid time precedes the state");
        if (t > state.time) advance(state, t - state.time);
        ClusterSample smp = detect_microscopic_clusters(state, p, early_exit);
        rep.upsilon_ok = rep.upsilon_ok && smp.upsilon_ok;
        rep.samples.push_back(std::move(smp));
        if (early_exit && !rep.upsilon_ok) break;
    }
    return rep;
}

WilsonInterval wilson_interval(int successes, int n) {
    if (n <= 0 || successes < 0 || successes > n)
        throw std::invalid_argument("wilson_interval: bad counts");
    const double z = 1.959964;
    double ph = double(successes) / n;
    double z2n = z * z / n;
    double denom = 1.0 + z2n;
    double center = (ph + 0.5 * z2n) / denom;
    double half = z * std::sqrt(ph * (1.0 - ph) / n + 0.25 * z2n / n) / denom;
    WilsonInterval w;
    w.lo = std::max(0.0, center - half);
    w.hi = std::min(1.0, center + half);
    return w;
}

std::vector<UpsilonScanRow> upsilon_probability_scan(const std::vector<DomainParams>& doms,
                                                     const UpsilonScanConfig& cfg,
                                                     std::uint64_t base_seed) {
    if (cfg.n_runs < 1000)
        throw std::invalid_argument("upsilon_probability_scan: need at least 10^3 runs per eps");
    std::vector<UpsilonScanRow> rows;
    for (std::size_t di = 0; di < doms.size(); ++di) {
        const DomainParams& dom = doms[di];
        ConditioningParams p = conditioning_defaults(dom, cfg.tau, cfg.horizon);
        p.radius_scale = cfg.radius_scale;
        p.strict = cfg.strict;
        UpsilonScanRow row;
        row.eps = dom.eps;
        row.param_violations = validate_conditioning(p, dom.eps);
        auto grid = derive_sample_grid(p, cfg.thetas, cfg.k_max, cfg.r_max);
        int bad = 0;
        for (int run = 0; run < cfg.n_runs; ++run) {
            auto rng = make_rng(base_seed, {tag_clusters, std::uint64_t(di), std::uint64_t(run)});
            SystemState st = sample_configuration(dom, cfg.sampler, rng);
            if (!evaluate_upsilon(std::move(st), p, grid, true).upsilon_ok) ++bad;
        }
        row.n_runs = cfg.n_runs;
        row.n_violations = bad;
        row.p_hat = double(bad) / cfg.n_runs;
        row.ci = wilson_interval(bad, cfg.n_runs);
        rows.push_back(std::move(row));
    }
    return rows;
}

CollisionGraph classify_collision_graph(const std::vector<CollisionEvent>& log, double t0,
                                        double t1) {
    CollisionGraph g;
    g.t0 = t0;
    g.t1 = t1;
    double prev = -1e300;
    std::map<int, int> index;
    for (const auto& e : log) {
        if (e.time < prev)
            throw std::invalid_argument("classify_collision_graph: log not sorted by time");
        prev = e.time;
        if (e.time < t0 || e.time > t1) continue;
        index.emplace(e.i, 0);
        index.emplace(e.j, 0);
    }
    for (auto& [id, pos] : index) {
        pos = int(g.vertices.size());
        g.vertices.push_back(id);
    }
    UnionFind uf(int(g.vertices.size()));
    for (const auto& e : log) {
        if (e.time < t0 || e.time > t1) continue;
        GraphEdge ge;
        ge.i = e.i;
        ge.j = e.j;
        ge.time = e.time;
        ge.cycle = uf.unite(index[e.i], index[e.j]) == 0;
        g.edges.push_back(ge);
    }
    return g;
}

GraphSummary summarize_collision_graph(const CollisionGraph& g, int cycle_cap) {
    GraphSummary s;
    s.cycle_cap = cycle_cap;
    int n = int(g.vertices.size());
    std::map<int, int> index;
    for (int i = 0; i < n; ++i) index[g.vertices[i]] = i;
    UnionFind uf(n);
    s.cycle_counts.assign(n, 0);
    for (const auto& e : g.edges) {
        if (e.cycle) {
            ++s.n_cycle;
            for (int v : {index[e.i], index[e.j]})
                if (s.cycle_counts[v] < cycle_cap) ++s.cycle_counts[v];
        } else {
            ++s.n_tree;
        }
        uf.unite(index[e.i], index[e.j]);
    }
    int max_size = 0;
    for (int i = 0; i < n; ++i)
        if (uf.find(i) == i) max_size = std::max(max_size, uf.size[i]);
    s.component_size_histogram.assign(std::size_t(max_size) + 1, 0);
    for (int i = 0; i < n; ++i)
        if (uf.find(i) == i) ++s.component_size_histogram[uf.size[i]];
    for (int c : s.cycle_counts)
        if (c >= cycle_cap) ++s.n_capped;
    return s;
}

void write_cluster_report_jsonl(std::ostream& os, const ClusterReport& rep) {
    for (const auto& smp : rep.samples) {
        nlohmann::json j;
        j["time"] = smp.time;
        j["max_cluster_size"] = smp.max_cluster_size;
        j["max_speed"] = smp.max_speed;
        j["upsilon_ok"] = smp.upsilon_ok;
        j["truncated"] = smp.truncated;
        j["size_histogram"] = smp.size_histogram;
        os << j.dump() << "\n";
    }
    nlohmann::json tail;
    tail["overall_upsilon_ok"] = rep.upsilon_ok;
    os << tail.dump() << "\n";
}

void write_graph_summary_jsonl(std::ostream& os, const CollisionGraph& g, const GraphSummary& s) {
    nlohmann::json j;
    j["window"] = {g.t0, g.t1};
    j["n_vertices"] = g.vertices.size();
    j["n_tree"] = s.n_tree;
    j["n_cycle"] = s.n_cycle;
    j["component_size_histogram"] = s.component_size_histogram;
    j["cycle_cap"] = s.cycle_cap;
    j["n_capped"] = s.n_capped;
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges)
        edges.push_back({{"i", e.i}, {"j", e.j}, {"time", e.time},
                         {"class", e.cycle ? "cycle" : "tree"}});
    j["edges"] = edges;
    os << j.dump() << "\n";
}

}  // namespace fluctsim
