#include "fluctsim/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace fluctsim {

double empirical_field(const SystemState& s, const TestFunction& h) {
    double sum = 0.0;
    for (const auto& p : s.particles) sum += eval(h, p.x, p.v, s.dom);
    return sum / s.dom.mu_eps;
}

namespace {

// All set partitions of {0..m-1}, each partition a list of blocks.
void set_partitions_rec(int m, int next, std::vector<std::vector<int>>& current,
                        std::vector<std::vector<std::vector<int>>>& out) {
    if (next == m) {
        out.push_back(current);
        return;
    }
    // Index loop: deeper calls push a new block, which may reallocate
    // `current` and would invalidate range-for iterators here.
    for (std::size_t b = 0; b < current.size(); ++b) {
        current[b].push_back(next);
        set_partitions_rec(m, next + 1, current, out);
        current[b].pop_back();
    }
    current.push_back({next});
    set_partitions_rec(m, next + 1, current, out);
    current.pop_back();
}

std::vector<std::vector<std::vector<int>>> set_partitions(int m) {
    std::vector<std::vector<std::vector<int>>> out;
    std::vector<std::vector<int>> current;
    set_partitions_rec(m, 0, current, out);
    return out;
}

// Distinct-tuple sum over ordered tuples of pairwise different indices:
//   sum over partitions P of prod_{blocks b} (-1)^{|b|-1} (|b|-1)! S_b,
// where S_b is the one-particle power sum of the product of the block's
// factors.
double distinct_tuple_sum(const SystemState& s, const std::vector<TestFunction>& factors) {
    int m = int(factors.size());
    if (m == 0) return 1.0;
    int n = s.n();
    std::vector<std::vector<double>> vals(m, std::vector<double>(n));
    for (int p = 0; p < m; ++p)
        for (int i = 0; i < n; ++i)
            vals[p][i] = eval(factors[p], s.particles[i].x, s.particles[i].v, s.dom);

    double total = 0.0;
    for (const auto& partition : set_partitions(m)) {
        double term = 1.0;
        for (const auto& block : partition) {
            double sb = 0.0;
            for (int i = 0; i < n; ++i) {
                double prod = 1.0;
                for (int p : block) prod *= vals[p][i];
                sb += prod;
            }
            int sz = int(block.size());
            double coeff = (sz % 2 == 0 ? -1.0 : 1.0);
            for (int k = 2; k < sz; ++k) coeff *= k;
            term *= coeff * sb;
        }
        total += term;
    }
    return total;
}

}  // namespace

double m_particle_field(const SystemState& s, const std::vector<TestFunction>& factors) {
    int m = int(factors.size());
    if (m < 1 || m > 3)
        throw std::invalid_argument("m_particle_field: unsupported m = " + std::to_string(m) +
                                    " (1 <= m <= 3)");
    return distinct_tuple_sum(s, factors) / std::pow(s.dom.mu_eps, m);
}

double m_particle_field_enumerated(const SystemState& s, const std::vector<TestFunction>& factors) {
    int m = int(factors.size());
    if (m < 1 || m > 3) throw std::invalid_argument("m_particle_field_enumerated: 1 <= m <= 3");
    int n = s.n();
    std::vector<std::vector<double>> vals(m, std::vector<double>(n));
    for (int p = 0; p < m; ++p)
        for (int i = 0; i < n; ++i)
            vals[p][i] = eval(factors[p], s.particles[i].x, s.particles[i].v, s.dom);
    double sum = 0.0;
    if (m == 1) {
        for (int i = 0; i < n; ++i) sum += vals[0][i];
    } else if (m == 2) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (j != i) sum += vals[0][i] * vals[1][j];
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                double vij = vals[0][i] * vals[1][j];
                for (int k = 0; k < n; ++k)
                    if (k != i && k != j) sum += vij * vals[2][k];
            }
    }
    return sum / std::pow(s.dom.mu_eps, m);
}

double ostar_product(const SystemState& s, const std::vector<OstarFactor>& factors) {
    int nb = int(factors.size());
    if (nb < 1 || nb > 3)
        throw std::invalid_argument("ostar_product: 1 <= |B| <= 3 factors required");
    int total_m = 0;
    for (const auto& f : factors) {
        if (f.h.empty()) throw std::invalid_argument("ostar_product: empty factor");
        total_m += int(f.h.size());
    }
    if (total_m > 6) throw std::invalid_argument("ostar_product: sum of factor orders exceeds 6");

    double sum = 0.0;
    for (int mask = 0; mask < (1 << nb); ++mask) {
        std::vector<TestFunction> concat;
        double coeff = 1.0;
        for (int i = 0; i < nb; ++i) {
            if (mask & (1 << i))
                concat.insert(concat.end(), factors[i].h.begin(), factors[i].h.end());
            else
                coeff *= -factors[i].centering;
        }
        double pi_val = concat.empty()
                            ? 1.0
                            : distinct_tuple_sum(s, concat) / std::pow(s.dom.mu_eps, concat.size());
        sum += coeff * pi_val;
    }
    return std::pow(s.dom.mu_eps, 0.5 * nb) * sum;
}

// ---- ensemble statistics ---------------------------------------------------

namespace {

void check_data(const MomentData& d) {
    if (d.n_runs() < 2) throw std::invalid_argument("moment statistics: need at least 2 runs");
    for (const auto& row : d.raw)
        if (int(row.size()) != d.n_slots())
            throw std::invalid_argument("moment statistics: ragged sample matrix");
}

// Column sums, computed once; leave-one-out means follow in O(1).
std::vector<double> col_sums(const MomentData& d) {
    std::vector<double> m(d.n_slots(), 0.0);
    for (const auto& row : d.raw)
        for (int s = 0; s < d.n_slots(); ++s) m[s] += row[s];
    return m;
}

std::vector<double> col_means(const MomentData& d, const std::vector<double>& sums, int leave_out) {
    int R = d.n_runs();
    std::vector<double> m(d.n_slots());
    for (int s = 0; s < d.n_slots(); ++s)
        m[s] = leave_out < 0 ? sums[s] / R : (sums[s] - d.raw[leave_out][s]) / (R - 1);
    return m;
}

double jackknife_se(const std::vector<double>& leave_out_stats) {
    int R = int(leave_out_stats.size());
    double mean = 0.0;
    for (double v : leave_out_stats) mean += v;
    mean /= R;
    double ss = 0.0;
    for (double v : leave_out_stats) ss += (v - mean) * (v - mean);
    return std::sqrt(ss * double(R - 1) / double(R));
}

// Product moment of centered fields over the runs != leave_out, with the
// centering recomputed on those runs.
double product_moment(const MomentData& d, const std::vector<double>& sums,
                      const std::vector<int>& slots, int leave_out) {
    auto c = col_means(d, sums, leave_out);
    double smu = std::sqrt(d.mu_eps);
    double sum = 0.0;
    int R = d.n_runs(), used = 0;
    for (int r = 0; r < R; ++r) {
        if (r == leave_out) continue;
        double prod = 1.0;
        for (int s : slots) prod *= smu * (d.raw[r][s] - c[s]);
        sum += prod;
        ++used;
    }
    return sum / used;
}

// Ensemble covariance (1/(R-1) normalization) over runs != leave_out.
double cov_pair(const MomentData& d, const std::vector<double>& sums, int a, int b, int leave_out) {
    auto c = col_means(d, sums, leave_out);
    double sum = 0.0;
    int R = d.n_runs(), used = 0;
    for (int r = 0; r < R; ++r) {
        if (r == leave_out) continue;
        sum += (d.raw[r][a] - c[a]) * (d.raw[r][b] - c[b]);
        ++used;
    }
    return d.mu_eps * sum / (used - 1);
}

double wick_four(const MomentData& d, const std::vector<double>& sums, const std::vector<int>& s,
                 int leave_out) {
    return cov_pair(d, sums, s[0], s[1], leave_out) * cov_pair(d, sums, s[2], s[3], leave_out) +
           cov_pair(d, sums, s[0], s[2], leave_out) * cov_pair(d, sums, s[1], s[3], leave_out) +
           cov_pair(d, sums, s[0], s[3], leave_out) * cov_pair(d, sums, s[1], s[2], leave_out);
}

}  // namespace

CovarianceEstimate covariance_estimate(const MomentData& data, int a, int b) {
    check_data(data);
    int R = data.n_runs();
    auto sums = col_sums(data);
    CovarianceEstimate out;
    out.value = cov_pair(data, sums, a, b, -1);
    std::vector<double> loo(R);
    for (int r = 0; r < R; ++r) loo[r] = cov_pair(data, sums, a, b, r);
    out.std_error = jackknife_se(loo);

    double va = cov_pair(data, sums, a, a, -1), vb = cov_pair(data, sums, b, b, -1);
    double denom = std::sqrt(std::max(va * vb, 1e-300));
    double rho = std::clamp(out.value / denom, -0.999999, 0.999999);
    out.correlation = rho;
    // Fisher z interval for the correlation, 95%.
    double z = 0.5 * std::log((1 + rho) / (1 - rho));
    double half = 1.959964 / std::sqrt(std::max(R - 3, 1));
    out.fisher_lo = std::tanh(z - half);
    out.fisher_hi = std::tanh(z + half);
    return out;
}

MomentEstimate estimate_product_moment(const MomentData& data, const std::vector<int>& slots) {
    check_data(data);
    if (data.n_runs() < 100)
        throw std::invalid_argument("estimate_product_moment: n_runs < 100 gives meaningless "
                                    "jackknife errors; gather more runs");
    int P = int(slots.size());
    if (P < 2 || P > 4)
        throw std::invalid_argument("estimate_product_moment: P must be 2, 3 or 4");
    for (int s : slots)
        if (s < 0 || s >= data.n_slots())
            throw std::invalid_argument("estimate_product_moment: slot index out of range");

    int R = data.n_runs();
    auto sums = col_sums(data);
    MomentEstimate out;
    out.slots = slots;
    out.estimate = product_moment(data, sums, slots, -1);
    std::vector<double> loo(R);
    for (int r = 0; r < R; ++r) loo[r] = product_moment(data, sums, slots, r);
    out.std_error = jackknife_se(loo);

    if (P == 3) {
        out.prediction = 0.0;
        out.deviation_std_error = out.std_error;
        out.z_score = out.std_error > 0 ? out.estimate / out.std_error : 0.0;
    } else if (P == 4) {
        out.prediction = wick_four(data, sums, slots, -1);
        double dev = out.estimate - *out.prediction;
        std::vector<double> loo_dev(R);
        for (int r = 0; r < R; ++r) loo_dev[r] = loo[r] - wick_four(data, sums, slots, r);
        out.deviation_std_error = jackknife_se(loo_dev);
        out.z_score = out.deviation_std_error > 0 ? dev / out.deviation_std_error : 0.0;
    } else {
        out.z_score = out.std_error > 0 ? out.estimate / out.std_error : 0.0;
    }
    return out;
}

ShapeEstimate estimate_shape(const MomentData& data, int slot) {
    check_data(data);
    int R = data.n_runs();
    auto sums = col_sums(data);
    auto shape = [&](int leave_out, double& skew, double& kurt) {
        auto c = col_means(data, sums, leave_out);
        double m2 = 0, m3 = 0, m4 = 0;
        int used = 0;
        for (int r = 0; r < R; ++r) {
            if (r == leave_out) continue;
            double x = data.raw[r][slot] - c[slot];
            double x2 = x * x;
            m2 += x2;
            m3 += x2 * x;
            m4 += x2 * x2;
            ++used;
        }
        m2 /= used;
        m3 /= used;
        m4 /= used;
        skew = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
        kurt = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    };
    ShapeEstimate out;
    shape(-1, out.skewness, out.excess_kurtosis);
    std::vector<double> loo_s(R), loo_k(R);
    for (int r = 0; r < R; ++r) shape(r, loo_s[r], loo_k[r]);
    out.skewness_se = jackknife_se(loo_s);
    out.kurtosis_se = jackknife_se(loo_k);
    return out;
}

void write_moments_csv(std::ostream& os, const MomentData& data,
                       const std::vector<MomentEstimate>& rows) {
    os << "P,times,test_ids,estimate,std_error,wick_prediction,z_score\n";
    char buf[512];
    for (const auto& r : rows) {
        std::string times, ids;
        for (std::size_t i = 0; i < r.slots.size(); ++i) {
            char t[48];
            std::snprintf(t, sizeof t, "%g", data.slot_times[r.slots[i]]);
            times += (i ? ";" : "") + std::string(t);
            ids += (i ? ";" : "") + data.slot_ids[r.slots[i]];
        }
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%.17g,%.17g,%.17g,%.17g\n", int(r.slots.size()),
                      times.c_str(), ids.c_str(), r.estimate, r.std_error,
                      r.prediction ? *r.prediction : 0.0, r.z_score);
        os << buf;
    }
}

}  // namespace fluctsim
