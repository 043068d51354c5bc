#include "fluctsim/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "fluctsim/dynamics.hpp"

namespace fluctsim {

namespace {

void drift(std::vector<Particle>& ps, double dt, const DomainParams& dom) {
    for (auto& p : ps) {
        p.x += dt * p.v;
        wrap_unit_vec(p.x, dom.d);
    }
}

struct NextHit {
    double dt = 0.0;
    int i = 0, j = 0;
};

// Earliest pair contact within `span`, nothing if the flow is free that long.
std::optional<NextHit> next_collision(const std::vector<Particle>& ps, const DomainParams& dom,
                                      double span) {
    std::optional<NextHit> best;
    for (int i = 0; i < int(ps.size()); ++i)
        for (int j = i + 1; j < int(ps.size()); ++j) {
            auto ev = predict_pair_collision(ps[i], ps[j], dom);
            if (!ev || ev->time > span) continue;
            if (!best || ev->time < best->dt) best = NextHit{ev->time, i, j};
        }
    return best;
}

Vec contact_normal(const Particle& a, const Particle& b, const DomainParams& dom) {
    Vec r = torus_displacement(a.x, b.x, dom.d);
    double n = std::sqrt(norm2(r));
    return r * (1.0 / n);
}

void check_no_overlap(const std::vector<Particle>& ps, const DomainParams& dom,
                      const char* who) {
    for (int i = 0; i < int(ps.size()); ++i)
        for (int j = i + 1; j < int(ps.size()); ++j)
            if (torus_distance(ps[i].x, ps[j].x, dom.d) < dom.eps * (1.0 - 1e-12))
                throw std::invalid_argument(std::string(who) + ": particles " +
                                            std::to_string(i) + " and " + std::to_string(j) +
                                            " overlap");
}

}  // namespace

PseudoTrajectory build_backward_pseudo_trajectory(const DomainParams& dom,
                                                  const std::vector<Particle>& roots,
                                                  const std::vector<PseudoCreation>& creations,
                                                  double theta, double delta) {
    if (roots.empty())
        throw std::invalid_argument("build_backward_pseudo_trajectory: no root particles");
    if (!(delta > 0))
        throw std::invalid_argument("build_backward_pseudo_trajectory: delta must be positive");
    check_no_overlap(roots, dom, "build_backward_pseudo_trajectory");
    double prev_t = theta;
    for (std::size_t k = 0; k < creations.size(); ++k) {
        const auto& c = creations[k];
        if (!(c.time < prev_t) || !(c.time > theta - delta))
            throw std::invalid_argument(
                "build_backward_pseudo_trajectory: creation times must decrease strictly inside "
                "the window");
        prev_t = c.time;
        if (c.parent < 0 || c.parent >= int(roots.size() + k))
            throw std::invalid_argument("build_backward_pseudo_trajectory: parent index out of "
                                        "range at creation " + std::to_string(k));
        if (c.sign != 1 && c.sign != -1)
            throw std::invalid_argument("build_backward_pseudo_trajectory: sign must be +1 or -1");
        if (std::fabs(std::sqrt(norm2(c.omega)) - 1.0) > 1e-9)
            throw std::invalid_argument("build_backward_pseudo_trajectory: omega must be a unit "
                                        "vector at creation " + std::to_string(k));
    }

    PseudoTrajectory pt;
    pt.dom = dom;
    pt.theta = theta;
    pt.delta = delta;
    pt.roots = roots;
    pt.creations = creations;

    std::vector<Particle> ps = roots;
    double t_now = theta;
    pt.record.push_back({t_now, "root", ps});

    // Backward transport = forward flow on negated velocities; specular
    // scattering commutes with the sign flip, so collisions are handled by
    // the same rule.
    auto run_backward_to = [&](double t_target) {
        for (auto& p : ps) p.v = p.v * -1.0;
        double remaining = t_now - t_target;
        while (remaining > 0) {
            auto hit = next_collision(ps, dom, remaining);
            if (!hit) {
                drift(ps, remaining, dom);
                break;
            }
            drift(ps, hit->dt, dom);
            remaining -= hit->dt;
            Vec n = contact_normal(ps[hit->i], ps[hit->j], dom);
            scatter(ps[hit->i].v, ps[hit->j].v, n);
            ++pt.internal_collisions;
            auto snap = ps;
            for (auto& p : snap) p.v = p.v * -1.0;
            pt.record.push_back({t_target + remaining,
                                 "collision " + std::to_string(hit->i) + "-" +
                                     std::to_string(hit->j),
                                 std::move(snap)});
        }
        for (auto& p : ps) p.v = p.v * -1.0;
        t_now = t_target;
    };

    for (std::size_t k = 0; k < creations.size(); ++k) {
        const auto& c = creations[k];
        run_backward_to(c.time);
        double flux = dot(c.omega, c.velocity - ps[c.parent].v);
        if (!(flux > 0)) {
            pt.valid = false;
            pt.reason = "creation " + std::to_string(k) + ": nonpositive flux " +
                        std::to_string(flux);
            return pt;
        }
        Particle fresh;
        fresh.x = ps[c.parent].x + (dom.eps * double(c.sign)) * c.omega;
        wrap_unit_vec(fresh.x, dom.d);
        fresh.v = c.velocity;
        for (int i = 0; i < int(ps.size()); ++i) {
            if (i == c.parent) continue;  // the parent sits at distance eps by construction
            if (torus_distance(fresh.x, ps[i].x, dom.d) < dom.eps * (1.0 - 1e-12)) {
                pt.valid = false;
                pt.reason = "creation " + std::to_string(k) + ": overlaps particle " +
                            std::to_string(i);
                return pt;
            }
        }
        ps.push_back(fresh);
        if (c.sign == 1) scatter(ps[c.parent].v, ps.back().v, c.omega);
        pt.record.push_back({t_now, "creation " + std::to_string(k), ps});
    }

    run_backward_to(theta - delta);
    pt.record.push_back({t_now, "final", ps});
    pt.final_state = std::move(ps);
    pt.valid = true;
    return pt;
}

ForwardResult reconstruct_forward(const DomainParams& dom, const std::vector<Particle>& initial,
                                  double duration, const ForwardRules& rules) {
    if (!(duration >= 0))
        throw std::invalid_argument("reconstruct_forward: duration must be nonnegative");
    if (rules.s_bar.size() != rules.s.size())
        throw std::invalid_argument("reconstruct_forward: sign lists differ in length");
    for (std::size_t k = 0; k < rules.s_bar.size(); ++k)
        if ((rules.s_bar[k] != 1 && rules.s_bar[k] != -1) ||
            (rules.s[k] != 1 && rules.s[k] != -1))
            throw std::invalid_argument("reconstruct_forward: signs must be +1 or -1");
    check_no_overlap(initial, dom, "reconstruct_forward");

    const bool plain = rules.s_bar.empty();
    ForwardResult out;
    std::vector<Particle> ps = initial;
    std::vector<int> ids(ps.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = int(i);

    double t = 0.0;
    while (true) {
        double remaining = duration - t;
        auto hit = next_collision(ps, dom, remaining);
        if (!hit) {
            drift(ps, remaining, dom);
            t = duration;
            break;
        }
        drift(ps, hit->dt, dom);
        t += hit->dt;
        if (plain) {
            Vec n = contact_normal(ps[hit->i], ps[hit->j], dom);
            scatter(ps[hit->i].v, ps[hit->j].v, n);
            ++out.plain_collisions;
            continue;
        }
        std::size_t k = std::size_t(out.encounters);
        if (k >= rules.s_bar.size())
            throw std::runtime_error(
                "reconstruct_forward: encounter budget exceeded after " +
                std::to_string(out.encounters) +
                " sign pairs; the flow is not minimal for these rules");
        ++out.encounters;
        int si = hit->i, sj = hit->j;
        int larger_slot = ids[si] > ids[sj] ? si : sj;
        int smaller_slot = larger_slot == si ? sj : si;
        int removed_slot = rules.s_bar[k] == 1 ? smaller_slot : larger_slot;
        int survivor_slot = removed_slot == si ? sj : si;
        if (rules.s[k] == 1) {
            Vec n = contact_normal(ps[survivor_slot], ps[removed_slot], dom);
            double c = dot(ps[survivor_slot].v - ps[removed_slot].v, n);
            ps[survivor_slot].v -= c * n;
        }
        out.annihilations.push_back({t, ids[removed_slot], ids[survivor_slot]});
        ps.erase(ps.begin() + removed_slot);
        ids.erase(ids.begin() + removed_slot);
    }
    out.particles = std::move(ps);
    out.ids = std::move(ids);
    out.t_end = t;
    return out;
}

namespace {

nlohmann::json vec_json(const Vec& v, int d) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < d; ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const nlohmann::json& a) {
    Vec v;
    for (std::size_t i = 0; i < a.size() && i < 3; ++i) v[i] = a[i].get<double>();
    return v;
}

nlohmann::json particles_json(const std::vector<Particle>& ps, int d) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : ps) a.push_back({{"x", vec_json(p.x, d)}, {"v", vec_json(p.v, d)}});
    return a;
}

}  // namespace

void write_pseudo_trajectory_json(std::ostream& os, const PseudoTrajectory& pt) {
    int d = pt.dom.d;
    nlohmann::json j;
    j["dim"] = d;
    j["eps"] = pt.dom.eps;
    j["theta"] = pt.theta;
    j["delta"] = pt.delta;
    j["roots"] = particles_json(pt.roots, d);
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : pt.creations)
        cs.push_back({{"parent", c.parent},
                      {"sign", c.sign},
                      {"time", c.time},
                      {"omega", vec_json(c.omega, d)},
                      {"velocity", vec_json(c.velocity, d)}});
    j["creations"] = cs;
    j["valid"] = pt.valid;
    j["reason"] = pt.reason;
    j["internal_collisions"] = pt.internal_collisions;
    j["final_state"] = particles_json(pt.final_state, d);
    nlohmann::json rec = nlohmann::json::array();
    for (const auto& snap : pt.record)
        rec.push_back({{"time", snap.time},
                       {"event", snap.event},
                       {"particles", particles_json(snap.particles, d)}});
    j["record"] = rec;
    os << j.dump(2) << "\n";
}

PseudoInputs read_pseudo_trajectory_inputs(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    PseudoInputs in;
    in.dom = DomainParams(j.at("dim").get<int>(), j.at("eps").get<double>());
    in.theta = j.at("theta").get<double>();
    in.delta = j.at("delta").get<double>();
    for (const auto& p : j.at("roots"))
        in.roots.push_back({vec_from_json(p.at("x")), vec_from_json(p.at("v"))});
    for (const auto& c : j.at("creations")) {
        PseudoCreation pc;
        pc.parent = c.at("parent").get<int>();
        pc.sign = c.at("sign").get<int>();
        pc.time = c.at("time").get<double>();
        pc.omega = vec_from_json(c.at("omega"));
        pc.velocity = vec_from_json(c.at("velocity"));
        in.creations.push_back(pc);
    }
    return in;
}

}  // namespace fluctsim
