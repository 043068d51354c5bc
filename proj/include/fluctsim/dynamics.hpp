#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "fluctsim/engine.hpp"
#include "fluctsim/state.hpp"

namespace fluctsim {

struct AdvanceReport {
    EngineStats stats;
    Vec momentum_before, momentum_after;
    double energy_before = 0.0, energy_after = 0.0;
    double momentum_drift = 0.0;  // |delta p| / max(|p0|, sqrt(N))
    double energy_drift = 0.0;    // |delta E| / E0
};

// Run the event-driven flow for a duration, mutating the state in place.
// Collision events go to the optional sink in time order.
AdvanceReport advance(SystemState& s, double duration, const EngineOptions& opts = {},
                      const std::function<void(const CollisionEvent&)>& sink = nullptr);

// First contact time of an isolated pair (ignoring all other particles),
// relative to now. Returns nothing if the pair never reaches distance eps
// within the minimum-image validity horizon, approaches tangentially below
// the grazing tolerance, or is separating. The returned omega is the contact
// normal (x_i - x_j)/eps evaluated at impact.
std::optional<CollisionEvent> predict_pair_collision(const Particle& a, const Particle& b,
                                                     const DomainParams& dom,
                                                     double grazing_tol = 1e-12);

struct ReversalReport {
    double max_position_deviation = 0.0;
    double max_velocity_deviation = 0.0;
    long events_forward = 0;
    long events_backward = 0;
};

// Advance t, negate velocities, advance t, negate back, and compare with the
// initial state. Runs the engine with double-double state so the report
// measures the dynamics' own reversibility rather than accumulated roundoff.
ReversalReport reverse_run_check(const SystemState& s0, double t, const EngineOptions& opts = {});

// CSV collision log, columns: time,i,j,omega components (d of them).
class CollisionLogWriter {
  public:
    explicit CollisionLogWriter(std::vector<CollisionEvent>* store) : store_(store) {}
    std::function<void(const CollisionEvent&)> sink() {
        auto* st = store_;
        return [st](const CollisionEvent& e) { st->push_back(e); };
    }

  private:
    std::vector<CollisionEvent>* store_;
};

void write_collision_log_csv(std::ostream& os, const std::vector<CollisionEvent>& events, int d);

}  // namespace fluctsim
