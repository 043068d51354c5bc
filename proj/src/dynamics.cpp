#include "fluctsim/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fluctsim {

double min_pair_separation(const SystemState& s) {
    double best = -1.0;
    for (int i = 0; i < s.n(); ++i)
        for (int j = i + 1; j < s.n(); ++j) {
            double d = torus_distance(s.particles[i].x, s.particles[j].x, s.dom.d);
            if (best < 0.0 || d < best) best = d;
        }
    return best;
}

AdvanceReport advance(SystemState& s, double duration, const EngineOptions& opts,
                      const std::function<void(const CollisionEvent&)>& sink) {
    AdvanceReport r;
    r.momentum_before = total_momentum(s);
    r.energy_before = total_kinetic_energy(s);

    Engine<double> eng(s, opts);
    if (sink) eng.set_event_sink(sink);
    eng.advance_to(s.time + duration);
    s = eng.snapshot();
    r.stats = eng.stats();

    r.momentum_after = total_momentum(s);
    r.energy_after = total_kinetic_energy(s);
    double pscale = std::max(std::sqrt(norm2(r.momentum_before)), std::sqrt(double(s.n())));
    r.momentum_drift = std::sqrt(norm2(r.momentum_after - r.momentum_before)) / pscale;
    r.energy_drift = r.energy_before > 0.0
                         ? std::fabs(r.energy_after - r.energy_before) / r.energy_before
                         : std::fabs(r.energy_after - r.energy_before);
    return r;
}

std::optional<CollisionEvent> predict_pair_collision(const Particle& a, const Particle& b,
                                                     const DomainParams& dom, double grazing_tol) {
    Vec rel = torus_displacement(a.x, b.x, dom.d);
    Vec dv = a.v - b.v;
    double sp = dot(rel, dv);
    if (sp >= 0.0) return std::nullopt;
    double a2 = norm2(dv);
    if (a2 == 0.0) return std::nullopt;
    double disc = sp * sp - a2 * (norm2(rel) - dom.eps * dom.eps);
    if (disc <= 0.0) return std::nullopt;
    double sq = std::sqrt(disc);
    if (sq < grazing_tol * dom.eps) return std::nullopt;  // grazing contact
    double s = (-sp - sq) / a2;
    if (s < 0.0) s = 0.0;
    // Minimum-image validity: beyond a relative displacement of ~1/4 box a
    // different periodic image could become the nearest one, so contacts past
    // that horizon are not claimed.
    if (s * std::sqrt(a2) > 0.25) return std::nullopt;

    CollisionEvent e;
    e.time = s;
    e.i = 0;
    e.j = 1;
    Vec at_contact = rel + s * dv;
    double dist = std::sqrt(norm2(at_contact));
    e.omega = at_contact * (1.0 / dist);
    return e;
}

ReversalReport reverse_run_check(const SystemState& s0, double t, const EngineOptions& opts) {
    ReversalReport r;
    Engine<DD> ref(s0, opts);  // untouched copy for comparison
    Engine<DD> eng(s0, opts);
    eng.advance_to(s0.time + t);
    r.events_forward = eng.stats().events;
    eng.negate_velocities();
    // The reversed leg runs in the same global time direction; physical time
    // retraces backward because all velocities are flipped.
    eng.advance_to(s0.time + 2.0 * t);
    r.events_backward = eng.stats().events - r.events_forward;
    eng.negate_velocities();
    auto [dx, dv] = eng.deviation_from(ref);
    r.max_position_deviation = dx;
    r.max_velocity_deviation = dv;
    return r;
}

void write_collision_log_csv(std::ostream& os, const std::vector<CollisionEvent>& events, int d) {
    os << (d == 3 ? "time,i,j,omega0,omega1,omega2\n" : "time,i,j,omega0,omega1\n");
    char buf[160];
    for (const auto& e : events) {
        if (d == 3)
            std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%.17g,%.17g,%.17g\n", e.time, e.i, e.j,
                          e.omega[0], e.omega[1], e.omega[2]);
        else
            std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%.17g,%.17g\n", e.time, e.i, e.j, e.omega[0],
                          e.omega[1]);
        os << buf;
    }
}

}  // namespace fluctsim
