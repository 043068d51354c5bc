#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fluctsim/domain.hpp"

namespace fluctsim {

struct SystemState {
    DomainParams dom;
    double time = 0.0;
    std::vector<Particle> particles;

    int n() const { return int(particles.size()); }
};

// One hard-sphere collision. omega is the unit contact vector
// (x_i - x_j) / eps at impact; immediately before impact the pair approaches,
// (v_i - v_j) . omega < 0.
struct CollisionEvent {
    double time = 0.0;
    int i = 0;
    int j = 0;
    Vec omega;
};

// Specular exchange of normal velocity components. Applying it twice with the
// same omega is the identity; momentum and kinetic energy are conserved.
template <class R>
inline void scatter(VecT<R>& vi, VecT<R>& vj, const VecT<R>& omega) {
    R c = dot(vi - vj, omega);
    vi -= c * omega;
    vj += c * omega;
}

inline void scatter(Particle& a, Particle& b, const Vec& omega) { scatter(a.v, b.v, omega); }

inline Vec total_momentum(const SystemState& s) {
    Vec p;
    for (const auto& q : s.particles) p += q.v;
    return p;
}

inline double total_kinetic_energy(const SystemState& s) {
    double e = 0.0;
    for (const auto& q : s.particles) e += 0.5 * norm2(q.v);
    return e;
}

// Smallest pairwise torus distance; O(N^2), meant for audits and small N.
double min_pair_separation(const SystemState& s);

// Snapshot serialization (JSONL): one header object, then one row per
// particle. Format documented in the README.
void write_snapshot(std::ostream& os, const SystemState& s);
SystemState read_snapshot(std::istream& is);

}  // namespace fluctsim
