#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fluctsim/state.hpp"

namespace fluctsim {

// One particle creation in a backward construction: at time `time` a fresh
// particle appears at distance eps from its parent, offset by sign * omega,
// with velocity `velocity`. sign = +1 additionally applies the scattering
// rule to the (parent, fresh) pair for earlier times. Parents are 0-based
// slot indices; the fresh particle of the j-th creation (0-based) gets slot
// roots + j.
struct PseudoCreation {
    int parent = 0;
    int sign = +1;  // +1 or -1
    double time = 0.0;
    Vec omega;      // unit vector
    Vec velocity;   // velocity of the fresh particle at creation
};

struct PseudoSnapshot {
    double time = 0.0;
    std::string event;  // "root", "creation k", "collision i-j", "final"
    std::vector<Particle> particles;
};

// Backward construction on the window (theta - delta, theta): transport the
// roots backward in time (hard-sphere flow with specular collisions), insert
// each creation at its time, and land on the full configuration at
// theta - delta. Structural errors (bad ordering, indices, non-unit omega)
// throw; geometric inadmissibility (overlap at creation, nonpositive flux)
// leaves a record with valid = false and a reason instead.
struct PseudoTrajectory {
    DomainParams dom;
    double theta = 0.0;
    double delta = 0.0;
    std::vector<Particle> roots;  // configuration at theta
    std::vector<PseudoCreation> creations;
    std::vector<PseudoSnapshot> record;   // event snapshots, times decreasing
    std::vector<Particle> final_state;    // at theta - delta when valid
    long internal_collisions = 0;         // pair collisions during transport
    bool valid = false;
    std::string reason;
};

PseudoTrajectory build_backward_pseudo_trajectory(const DomainParams& dom,
                                                  const std::vector<Particle>& roots,
                                                  const std::vector<PseudoCreation>& creations,
                                                  double theta, double delta);

// Per-encounter rules for the forward reconstruction, consumed in time
// order: s_bar = +1 keeps the larger slot id and removes the smaller one,
// s_bar = -1 removes the larger id; s = +1 scatters the survivor off the
// removed particle's incoming velocity, s = -1 leaves it untouched. Empty
// rules mean plain hard-sphere flow with no annihilations.
struct ForwardRules {
    std::vector<int> s_bar;
    std::vector<int> s;
};

struct AnnihilationEvent {
    double time = 0.0;
    int removed_id = 0;
    int survivor_id = 0;
};

struct ForwardResult {
    std::vector<Particle> particles;  // survivors, ascending id
    std::vector<int> ids;
    std::vector<AnnihilationEvent> annihilations;
    long encounters = 0;         // sign pairs consumed
    long plain_collisions = 0;   // scatters in plain-flow mode
    double t_end = 0.0;
};

// Forward flow over [0, duration] from `initial` (slot index = id). With
// rules present, every encounter consumes the next sign pair and removes one
// particle; running out of signs raises (the dynamics was not minimal).
ForwardResult reconstruct_forward(const DomainParams& dom, const std::vector<Particle>& initial,
                                  double duration, const ForwardRules& rules);

// Replay record: inputs plus the piecewise states.
void write_pseudo_trajectory_json(std::ostream& os, const PseudoTrajectory& pt);

// Parses the inputs of a replay record (roots, creations, window); feeding
// them back through build_backward_pseudo_trajectory reproduces the rest.
struct PseudoInputs {
    DomainParams dom;
    std::vector<Particle> roots;
    std::vector<PseudoCreation> creations;
    double theta = 0.0;
    double delta = 0.0;
};
PseudoInputs read_pseudo_trajectory_inputs(const std::string& json_text);

}  // namespace fluctsim
