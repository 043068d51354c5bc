#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "fluctsim/ddouble.hpp"
#include "fluctsim/state.hpp"

namespace fluctsim {

struct EngineOptions {
    double grazing_tol = 1e-12;  // skip contacts with normal speed below this
    double tie_tol = 1e-12;      // events closer than this count as a tie
    long max_events = 50'000'000;
    bool audit = false;          // track min pair separation at batch starts
};

struct EngineStats {
    long events = 0;
    long ties = 0;              // consecutive events within tie_tol (index order applied)
    long stale_discards = 0;    // heap entries invalidated by earlier collisions
    long missed_approach = 0;   // popped events whose pair turned out separating
    long batches = 0;
    long speed_guard_trips = 0;
    double max_contact_error = 0.0;   // max | |x_i-x_j| - eps | over processed events
    double min_separation = -1.0;     // audit: smallest pair distance seen, <0 = none observed
};

// Event-driven hard-sphere dynamics on the torus.
//
// Time is processed in batches of length H chosen so that no particle can move
// further than (cell width - eps)/2 within a batch (with a speed bound that is
// re-checked at every collision). All pair collisions inside the batch are then
// discoverable from the 3^d neighboring cells at batch start, so no
// cell-crossing events are needed. Predictions are invalidated lazily through
// per-particle event counters. Within a batch only the minimum image of a pair
// can produce a contact: any other periodic image starts at distance >= 0.5
// and relative motion per batch is bounded well below that.
//
// The scalar R is double for production and DD (double-double) for
// time-reversal diagnostics, where per-event roundoff would otherwise be
// amplified past useful levels by the flow's instability.
template <class R>
class Engine {
  public:
    explicit Engine(const SystemState& s, EngineOptions opts = {})
        : dom_(s.dom), opts_(opts), eps_(s.dom.eps), eps2_(R(s.dom.eps) * R(s.dom.eps)) {
        int n = s.n();
        x_.resize(n);
        v_.resize(n);
        tsync_.assign(n, R(s.time));
        cnt_.assign(n, 0);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 3; ++c) {
                x_[i][c] = R(s.particles[i].x[c]);
                v_[i][c] = R(s.particles[i].v[c]);
            }
        }
        now_ = R(s.time);
    }

    void set_event_sink(std::function<void(const CollisionEvent&)> sink) { sink_ = std::move(sink); }

    void advance_to(double T_target) {
        R T = R(T_target);
        while (now_ < T) run_batch(T);
    }

    void negate_velocities() {
        for (auto& v : v_) v = -v;
    }

    SystemState snapshot() const {
        SystemState s;
        s.dom = dom_;
        s.time = to_double(now_);
        s.particles.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) {
            for (int c = 0; c < dom_.d; ++c) {
                double xc = to_double(wrap_unit(x_[i][c]));
                if (xc >= 1.0) xc = 0.0;
                s.particles[i].x[c] = xc;
                s.particles[i].v[c] = to_double(v_[i][c]);
            }
        }
        return s;
    }

    const EngineStats& stats() const { return stats_; }
    double time() const { return to_double(now_); }

    // Max deviation from another engine's state (positions in torus metric).
    // Used by the reversal check; both engines must hold the same particles.
    std::pair<double, double> deviation_from(const Engine& o) const {
        double dx = 0.0, dv = 0.0;
        for (std::size_t i = 0; i < x_.size(); ++i) {
            VecT<R> w = torus_displacement(x_[i], o.x_[i], dom_.d);
            dx = std::max(dx, std::sqrt(std::max(0.0, to_double(norm2(w)))));
            dv = std::max(dv, std::sqrt(std::max(0.0, to_double(norm2(v_[i] - o.v_[i])))));
        }
        return {dx, dv};
    }

  private:
    struct Ev {
        R t;
        int i, j;
        std::uint32_t ci, cj;
    };
    struct EvLater {
        // min-heap on (t, i, j): std heap algorithms build a max-heap wrt the
        // comparator, so "later" means greater. Index order breaks exact time
        // ties deterministically.
        bool operator()(const Ev& a, const Ev& b) const {
            if (!(a.t == b.t)) return b.t < a.t;
            if (a.i != b.i) return a.i > b.i;
            return a.j > b.j;
        }
    };

    // ---- cells ----------------------------------------------------------

    int cell_index(const VecT<R>& x) const {
        int idx = 0;
        for (int c = 0; c < dom_.d; ++c) {
            double w = to_double(wrap_unit(x[c]));
            int k = int(w * m_);
            if (k >= m_) k = m_ - 1;
            if (k < 0) k = 0;
            idx = idx * m_ + k;
        }
        return idx;
    }

    void build_cells() {
        for (int c : used_cells_) head_[c] = -1;
        used_cells_.clear();
        for (int i = 0; i < int(x_.size()); ++i) {
            int c = cell_index(x_[i]);
            if (head_[c] < 0) used_cells_.push_back(c);
            nxt_[i] = head_[c];
            head_[c] = i;
            cell_of_[i] = c;
        }
    }

    template <class F>
    void for_neighbors(int i, int rings, F&& f) const {
        int base[3] = {0, 0, 0};
        int idx = cell_of_[i];
        for (int c = dom_.d - 1; c >= 0; --c) {
            base[c] = idx % m_;
            idx /= m_;
        }
        int lo2 = dom_.d == 3 ? -rings : 0, hi2 = dom_.d == 3 ? rings : 0;
        for (int d0 = -rings; d0 <= rings; ++d0)
            for (int d1 = -rings; d1 <= rings; ++d1)
                for (int d2 = lo2; d2 <= hi2; ++d2) {
                    int cc0 = wrapc(base[0] + d0), cc1 = wrapc(base[1] + d1);
                    int cell = dom_.d == 3 ? (cc0 * m_ + cc1) * m_ + wrapc(base[2] + d2)
                                           : cc0 * m_ + cc1;
                    for (int id = head_[cell]; id >= 0; id = nxt_[id]) f(id);
                }
    }

    int wrapc(int c) const { return c < 0 ? c + m_ : (c >= m_ ? c - m_ : c); }

    // ---- prediction ------------------------------------------------------

    void schedule(int i, int j) {
        if (i == j) return;
        R tm = tsync_[i] > tsync_[j] ? tsync_[i] : tsync_[j];
        VecT<R> xi = x_[i] + (tm - tsync_[i]) * v_[i];
        VecT<R> xj = x_[j] + (tm - tsync_[j]) * v_[j];
        VecT<R> rel = torus_displacement(xi, xj, dom_.d);
        VecT<R> dv = v_[i] - v_[j];
        R b = dot(rel, dv);
        if (b >= R(0)) return;  // separating
        R a = norm2(dv);
        if (!(a > R(0))) return;
        R disc = b * b - a * (norm2(rel) - eps2_);
        if (disc <= R(0)) return;
        R sq = sc_sqrt(disc);
        // Normal approach speed at contact is sq / eps; grazing hits are
        // dropped (and the tolerance is part of the contract).
        if (to_double(sq) < opts_.grazing_tol * eps_) return;
        R s = (-b - sq) / a;
        if (s < R(0)) s = R(0);  // contact at or just behind tm (roundoff)
        R thit = tm + s;
        if (thit > t1_) return;
        heap_.push_back({thit, i, j, cnt_[i], cnt_[j]});
        std::push_heap(heap_.begin(), heap_.end(), EvLater{});
    }

    void predict_from_cells(int i, int rings) {
        for_neighbors(i, rings, [&](int j) {
            if (j != i) schedule(std::min(i, j), std::max(i, j));
        });
    }

    // ---- batch loop ------------------------------------------------------

    void run_batch(R T) {
        int n = int(x_.size());
        stats_.batches++;

        double vmax = 0.0;
        for (int i = 0; i < n; ++i) vmax = std::max(vmax, to_double(norm2(v_[i])));
        vmax = std::sqrt(vmax);
        vbound_ = 1.5 * vmax + 1e-9;

        // Cell geometry: width at least ~2 eps and sized to the density; fall
        // back to all-pairs for small systems.
        double H;
        brute_ = false;
        double wmin = std::max(2.0 * eps_ * 1.05, 0.6 / std::pow(double(std::max(n, 1)), 1.0 / dom_.d));
        int cap = dom_.d == 2 ? 1024 : 100;
        m_ = std::clamp(int(std::floor(1.0 / wmin)), 1, cap);
        if (n < 24 || m_ < 4) {
            brute_ = true;
            H = 0.12 / vbound_;
        } else {
            double w = 1.0 / m_;
            H = (w - eps_) / (2.0 * vbound_);
            if (int(head_.size()) != m_pow_d()) {
                head_.assign(m_pow_d(), -1);
                used_cells_.clear();
                used_cells_.reserve(n);
            }
            nxt_.resize(n);
            cell_of_.resize(n);
        }
        t0_ = now_;
        t1_ = now_ + R(H);
        if (t1_ > T) t1_ = T;

        heap_.clear();
        if (brute_) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) schedule(i, j);
            if (opts_.audit) audit_pairs_brute();
        } else {
            build_cells();
            for (int i = 0; i < n; ++i) {
                for_neighbors(i, 1, [&](int j) {
                    if (j > i) schedule(i, j);
                });
            }
            if (opts_.audit) audit_pairs_cells();
        }

        R last_event_t = R(-1.0);
        bool have_last = false;
        while (!heap_.empty()) {
            const Ev top = heap_.front();
            if (top.t > t1_) break;
            std::pop_heap(heap_.begin(), heap_.end(), EvLater{});
            heap_.pop_back();
            if (top.ci != cnt_[top.i] || top.cj != cnt_[top.j]) {
                stats_.stale_discards++;
                continue;
            }
            process_event(top, last_event_t, have_last);
        }

        // Close the batch: everyone synced and wrapped at t1.
        for (int i = 0; i < n; ++i) {
            x_[i] += (t1_ - tsync_[i]) * v_[i];
            tsync_[i] = t1_;
            wrap_unit_vec(x_[i], dom_.d);
        }
        now_ = t1_;
    }

    void process_event(const Ev& ev, R& last_event_t, bool& have_last) {
        int i = ev.i, j = ev.j;
        x_[i] += (ev.t - tsync_[i]) * v_[i];
        x_[j] += (ev.t - tsync_[j]) * v_[j];
        tsync_[i] = tsync_[j] = ev.t;

        VecT<R> rel = torus_displacement(x_[i], x_[j], dom_.d);
        R dist = sc_sqrt(norm2(rel));
        double contact_err = std::fabs(to_double(dist) - eps_);
        stats_.max_contact_error = std::max(stats_.max_contact_error, contact_err);
        VecT<R> omega = rel * (R(1) / dist);
        R c = dot(v_[i] - v_[j], omega);
        if (!(c < R(0))) {
            // Geometry went stale in a way the counters didn't catch; drop it,
            // the pair gets re-predicted below anyway.
            stats_.missed_approach++;
            cnt_[i]++;
            cnt_[j]++;
            repredict(i, ev.t);
            repredict(j, ev.t);
            return;
        }

        if (have_last && to_double(fabs_r(ev.t - last_event_t)) <= opts_.tie_tol) stats_.ties++;
        last_event_t = ev.t;
        have_last = true;

        scatter(v_[i], v_[j], omega);
        cnt_[i]++;
        cnt_[j]++;
        stats_.events++;
        if (stats_.events > opts_.max_events)
            throw std::runtime_error("Engine: event safety cap exceeded (" +
                                     std::to_string(opts_.max_events) + ")");

        if (sink_) {
            CollisionEvent e;
            e.time = to_double(ev.t);
            e.i = i;
            e.j = j;
            for (int cc = 0; cc < dom_.d; ++cc) e.omega[cc] = to_double(omega[cc]);
            sink_(e);
        }

        // Post-collision speeds can exceed the bound assumed for the batch
        // horizon; shrink the window to the event time (already-synced state
        // stays valid) and let the next batch rebuild with fresh bounds.
        double si = to_double(norm2(v_[i])), sj = to_double(norm2(v_[j]));
        if (std::sqrt(std::max(si, sj)) > vbound_) {
            t1_ = ev.t;
            stats_.speed_guard_trips++;
            return;
        }
        repredict(i, ev.t);
        repredict(j, ev.t);
    }

    void repredict(int i, R /*tnow*/) {
        if (brute_) {
            for (int j = 0; j < int(x_.size()); ++j)
                if (j != i) schedule(std::min(i, j), std::max(i, j));
            return;
        }
        // One ring around the batch-start cell is sufficient mid-batch too:
        // every particle stays within (w - eps)/2 of its batch-start position
        // (the speed guard shrinks the window otherwise), so any pair reaching
        // contact started within one cell width of each other.
        for_neighbors(i, 1, [&](int j) {
            if (j != i) schedule(std::min(i, j), std::max(i, j));
        });
    }

    static R fabs_r(const R& x) { return sc_abs(x); }

    void audit_pairs_brute() {
        int n = int(x_.size());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) note_separation(i, j);
    }

    void audit_pairs_cells() {
        for (int i = 0; i < int(x_.size()); ++i)
            for_neighbors(i, 1, [&](int j) {
                if (j > i) note_separation(i, j);
            });
    }

    void note_separation(int i, int j) {
        double d2 = to_double(norm2(torus_displacement(x_[i], x_[j], dom_.d)));
        double d = std::sqrt(std::max(d2, 0.0));
        if (stats_.min_separation < 0.0 || d < stats_.min_separation) stats_.min_separation = d;
    }

    DomainParams dom_;
    EngineOptions opts_;
    double eps_;
    R eps2_;
    std::vector<VecT<R>> x_, v_;
    std::vector<R> tsync_;
    std::vector<std::uint32_t> cnt_;
    R now_{};
    R t0_{}, t1_{};
    double vbound_ = 0.0;
    bool brute_ = true;
    int m_ = 1;
    int m_pow_d() const { return dom_.d == 3 ? m_ * m_ * m_ : m_ * m_; }
    std::vector<int> head_, nxt_, cell_of_, used_cells_;
    std::vector<Ev> heap_;
    EngineStats stats_;
    std::function<void(const CollisionEvent&)> sink_;
};

}  // namespace fluctsim
