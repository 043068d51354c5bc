#include "fluctsim/generator.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

#include "fluctsim/maxwellian.hpp"
#include "fluctsim/parallel.hpp"
#include "fluctsim/rng.hpp"

namespace fluctsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kShards = 64;

// Hermite ladder couplings <hhat_a, v_j hhat_b>: sqrt(b_j + 1) one step up,
// sqrt(b_j) one step down, zero otherwise. Symmetric.
Eigen::MatrixXd ladder_matrix(const GalerkinBasis& basis, int j) {
    int nh = basis.n_hermite();
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(nh, nh);
    const auto& idx = basis.hermite_indices();
    for (int b = 0; b < nh; ++b) {
        MultiIndex up = idx[b];
        up[j] += 1;
        int a = basis.hermite_position(up);
        if (a >= 0) {
            double c = std::sqrt(double(idx[b][j] + 1));
            V(a, b) = c;
            V(b, a) = c;
        }
    }
    return V;
}

struct VBlockMean {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd se;
};

// Monte Carlo mean of q = w * dh dh^T over contact draws: v, u Maxwellian,
// omega uniform on the sphere folded onto the approach hemisphere, weight
// w = ((v - u) . omega) |S^{d-1}| / 2. dh is the four-point collision
// difference of the normalized Hermite factors, with the components that
// vanish identically by conservation (constant, each v_j) set to zero
// symbolically rather than evaluated.
VBlockMean collision_vblock(const GalerkinBasis& basis, std::int64_t n_mc,
                            std::uint64_t base_seed, RngTag tag, int n_workers) {
    int d = basis.dim();
    int nh = basis.n_hermite();
    std::vector<int> symbolic_zero;
    symbolic_zero.push_back(0);
    for (int j = 0; j < d; ++j) {
        MultiIndex e{0, 0, 0};
        e[j] = 1;
        int p = basis.hermite_position(e);
        if (p >= 0) symbolic_zero.push_back(p);
    }

    std::vector<Eigen::MatrixXd> sums(kShards), sums2(kShards);
    auto shard_draws = [&](int s) {
        return n_mc / kShards + (s < n_mc % kShards ? 1 : 0);
    };
    parallel_for_shards(kShards, resolve_workers(n_workers), [&](int s) {
        auto rng = make_rng(base_seed, {tag, std::uint64_t(s)});
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(nh, nh);
        Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(nh, nh);
        std::vector<double> hv(nh), hu(nh), hvp(nh), hup(nh), dh(nh);
        std::int64_t nd = shard_draws(s);
        for (std::int64_t it = 0; it < nd; ++it) {
            Vec v = maxwellian_sample(d, rng);
            Vec u = maxwellian_sample(d, rng);
            Vec omega = uniform_sphere(d, rng);
            double c = dot(v - u, omega);
            if (c < 0) {
                omega = omega * -1.0;
                c = -c;
            }
            double w = c * sphere_area(d) * 0.5;
            Vec vp = v - omega * c;
            Vec up = u + omega * c;
            basis.eval_hermite_all(v, hv.data());
            basis.eval_hermite_all(u, hu.data());
            basis.eval_hermite_all(vp, hvp.data());
            basis.eval_hermite_all(up, hup.data());
            for (int i = 0; i < nh; ++i) dh[i] = hvp[i] + hup[i] - hv[i] - hu[i];
            for (int i : symbolic_zero) dh[i] = 0.0;
            for (int i = 0; i < nh; ++i)
                for (int j = i; j < nh; ++j) {
                    double q = w * dh[i] * dh[j];
                    sum(i, j) += q;
                    sum2(i, j) += q * q;
                }
        }
        sums[s] = std::move(sum);
        sums2[s] = std::move(sum2);
    });

    Eigen::MatrixXd tot = Eigen::MatrixXd::Zero(nh, nh);
    Eigen::MatrixXd tot2 = Eigen::MatrixXd::Zero(nh, nh);
    for (int s = 0; s < kShards; ++s) {
        tot += sums[s];
        tot2 += sums2[s];
    }
    VBlockMean out;
    out.mean = Eigen::MatrixXd::Zero(nh, nh);
    out.se = Eigen::MatrixXd::Zero(nh, nh);
    double n = double(n_mc);
    for (int i = 0; i < nh; ++i)
        for (int j = i; j < nh; ++j) {
            double m = tot(i, j) / n;
            double var = std::max(0.0, (tot2(i, j) - tot(i, j) * m) / (n - 1.0));
            double se = std::sqrt(var / n);
            out.mean(i, j) = out.mean(j, i) = m;
            out.se(i, j) = out.se(j, i) = se;
        }
    return out;
}

}  // namespace

Eigen::MatrixXd transport_matrix(const GalerkinBasis& basis) {
    int n = basis.size();
    int nh = basis.n_hermite();
    int d = basis.dim();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::MatrixXd> V;
    for (int j = 0; j < d; ++j) V.push_back(ladder_matrix(basis, j));

    const auto& xm = basis.xmodes();
    for (int ix = 0; ix < basis.n_xmodes(); ++ix) {
        if (xm[ix].trig != GalerkinBasis::trig_cos) continue;
        int is = ix + 1;  // sin partner, same wavevector, by construction
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nh, nh);
        for (int j = 0; j < d; ++j)
            if (xm[ix].k[j] != 0) S += (kTwoPi * xm[ix].k[j]) * V[j];
        // <cos_k, d_j sin_k> = +2 pi k_j, its mirror is the exact negative,
        // so the two blocks below are exact transposes with opposite sign.
        B.block(ix * nh, is * nh, nh, nh) = -S;
        B.block(is * nh, ix * nh, nh, nh) = S;
    }
    return B;
}

GeneratorMatrix assemble_generator(const GalerkinBasis& basis, std::int64_t n_mc,
                                   std::uint64_t base_seed, int n_workers) {
    if (n_mc < 100000)
        throw std::invalid_argument("assemble_generator: n_mc must be at least 10^5");
    VBlockMean q = collision_vblock(basis, n_mc, base_seed, tag_generator_b, n_workers);
    int nh = basis.n_hermite();
    GeneratorMatrix out;
    out.B = transport_matrix(basis);
    out.mc_error = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    // Collision part -1/4 E[q], diagonal across spatial modes: collisions act
    // on velocities alone and the spatial factors are orthonormal.
    for (int ix = 0; ix < basis.n_xmodes(); ++ix) {
        out.B.block(ix * nh, ix * nh, nh, nh) += -0.25 * q.mean;
        out.mc_error.block(ix * nh, ix * nh, nh, nh) = 0.25 * q.se;
    }
    out.n_mc = n_mc;
    out.dim = basis.dim();
    out.fourier_cutoff = basis.fourier_cutoff();
    out.hermite_cutoff = basis.hermite_cutoff();
    return out;
}

NoiseMatrix assemble_noise(const GalerkinBasis& basis, std::int64_t n_mc, std::uint64_t base_seed,
                           int n_workers) {
    if (n_mc < 100000) throw std::invalid_argument("assemble_noise: n_mc must be at least 10^5");
    VBlockMean q = collision_vblock(basis, n_mc, base_seed, tag_generator_c, n_workers);
    int nh = basis.n_hermite();
    NoiseMatrix out;
    out.C = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    out.mc_error = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    for (int ix = 0; ix < basis.n_xmodes(); ++ix) {
        out.C.block(ix * nh, ix * nh, nh, nh) = 0.5 * q.mean;
        out.mc_error.block(ix * nh, ix * nh, nh, nh) = 0.5 * q.se;
    }
    out.n_mc = n_mc;
    out.dim = basis.dim();
    out.fourier_cutoff = basis.fourier_cutoff();
    out.hermite_cutoff = basis.hermite_cutoff();
    return out;
}

FdReport fd_check(const GeneratorMatrix& gen, const NoiseMatrix& noise) {
    if (gen.B.rows() != noise.C.rows() || gen.dim != noise.dim ||
        gen.fourier_cutoff != noise.fourier_cutoff || gen.hermite_cutoff != noise.hermite_cutoff)
        throw std::invalid_argument("fd_check: generator and noise use different bases");

    Eigen::MatrixXd R = gen.B + gen.B.transpose() + noise.C;
    FdReport rep;
    for (int k = 0; k < R.rows(); ++k)
        for (int l = 0; l < R.cols(); ++l) {
            // B and B^T entries come from one symmetric accumulator, so their
            // errors add linearly, not in quadrature.
            double eb = gen.mc_error(k, l) + gen.mc_error(l, k);
            double se = std::sqrt(eb * eb + noise.mc_error(k, l) * noise.mc_error(k, l));
            double r = std::abs(R(k, l));
            if (se > 0) {
                ++rep.n_mc_entries;
                rep.max_residual = std::max(rep.max_residual, r);
                rep.max_z = std::max(rep.max_z, r / se);
            } else {
                rep.max_exact_residual = std::max(rep.max_exact_residual, r);
            }
        }
    rep.pass = rep.max_z <= 3.0 && rep.max_exact_residual <= 1e-12;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "max |R| = %.3g (z = %.2f over %d sampled entries), closed-form entries <= %.3g",
                  rep.max_residual, rep.max_z, rep.n_mc_entries, rep.max_exact_residual);
    rep.detail = buf;
    return rep;
}

DissipativityReport dissipativity_check(const GeneratorMatrix& gen) {
    Eigen::MatrixXd S = 0.5 * (gen.B + gen.B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    DissipativityReport rep;
    rep.max_sym_eigenvalue = es.eigenvalues().maxCoeff();
    // Operator-norm bound on the 3-sigma entrywise error of sym(B):
    // |E|_2 <= sqrt(|E|_1 |E|_inf).
    Eigen::MatrixXd E = 1.5 * (gen.mc_error + gen.mc_error.transpose());
    double n1 = E.cwiseAbs().colwise().sum().maxCoeff();
    double ninf = E.cwiseAbs().rowwise().sum().maxCoeff();
    rep.tol = std::sqrt(n1 * ninf);
    rep.pass = rep.max_sym_eigenvalue <= rep.tol;
    return rep;
}

namespace {

struct Accum {
    double g = 0, g2 = 0, l = 0, l2 = 0, r = 0, r2 = 0;
};

void finish_entry(BalanceEntry& e, const Accum& a, double n, bool shared) {
    auto mean_se = [n](double s, double s2, double& m, double& se) {
        m = s / n;
        double var = std::max(0.0, (s2 - s * m) / (n - 1.0));
        se = std::sqrt(var / n);
    };
    mean_se(a.g, a.g2, e.gain, e.gain_se);
    mean_se(a.l, a.l2, e.loss, e.loss_se);
    if (shared) {
        double rm, rse;
        mean_se(a.r, a.r2, rm, rse);
        e.residual = rm;
        e.combined_se = rse;
    } else {
        e.residual = e.gain - e.loss;
        e.combined_se = std::sqrt(e.gain_se * e.gain_se + e.loss_se * e.loss_se);
    }
    e.z = e.combined_se > 0 ? e.residual / e.combined_se : 0.0;
}

}  // namespace

BalanceReport equilibrium_balance(const GalerkinBasis& basis, const DomainParams& dom,
                                  std::int64_t n_mc, std::uint64_t base_seed, bool shared_stream,
                                  int n_workers) {
    if (n_mc < 1000000)
        throw std::invalid_argument("equilibrium_balance: n_mc must be at least 10^6");
    if (basis.dim() != dom.d)
        throw std::invalid_argument("equilibrium_balance: basis and domain dimension differ");

    int d = dom.d;
    int nh = basis.n_hermite();
    double pref = dom.mu_eps * std::pow(dom.eps, d - 1);

    // Per-shard accumulators for each Hermite factor; the spatial integral is
    // handled symbolically (only the constant mode survives).
    std::vector<std::vector<Accum>> shard_acc(kShards, std::vector<Accum>(nh));
    auto shard_draws = [&](int s) { return n_mc / kShards + (s < n_mc % kShards ? 1 : 0); };

    auto gain_pass = [&](int s, bool with_ratio, bool also_loss, RngTag tag) {
        auto rng = make_rng(base_seed, {tag, std::uint64_t(s)});
        std::vector<double> hv(nh), hu(nh), hvp(nh), hup(nh);
        auto& acc = shard_acc[s];
        std::int64_t nd = shard_draws(s);
        for (std::int64_t it = 0; it < nd; ++it) {
            Vec v = maxwellian_sample(d, rng);
            Vec u = maxwellian_sample(d, rng);
            Vec omega = uniform_sphere(d, rng);
            double c = dot(u - v, omega);
            if (c < 0) {
                omega = omega * -1.0;
                c = -c;
            }
            double w = pref * c * sphere_area(d) * 0.5;
            Vec vp = v + omega * c;
            Vec up = u - omega * c;
            // Energy is conserved analytically; the exponent below is pure
            // rounding noise, kept so the gain really integrates the
            // post-collisional Maxwellians.
            double ratio = std::exp(0.5 * (norm2(v) + norm2(u) - norm2(vp) - norm2(up)));
            basis.eval_hermite_all(v, hv.data());
            if (shared_stream) {
                basis.eval_hermite_all(u, hu.data());
                basis.eval_hermite_all(vp, hvp.data());
                basis.eval_hermite_all(up, hup.data());
            }
            for (int i = 0; i < nh; ++i) {
                double phi = shared_stream ? 0.25 * (hv[i] + hu[i] + hvp[i] + hup[i]) : hv[i];
                if (with_ratio) {
                    double g = w * phi * ratio;
                    acc[i].g += g;
                    acc[i].g2 += g * g;
                }
                if (also_loss) {
                    double l = w * phi;
                    acc[i].l += l;
                    acc[i].l2 += l * l;
                    if (shared_stream) {
                        double r = w * phi * (ratio - 1.0);
                        acc[i].r += r;
                        acc[i].r2 += r * r;
                    }
                }
            }
        }
    };

    int workers = resolve_workers(n_workers);
    if (shared_stream) {
        parallel_for_shards(kShards, workers, [&](int s) { gain_pass(s, true, true, tag_balance_gain); });
    } else {
        parallel_for_shards(kShards, workers, [&](int s) { gain_pass(s, true, false, tag_balance_gain); });
        parallel_for_shards(kShards, workers, [&](int s) { gain_pass(s, false, true, tag_balance_loss); });
    }

    std::vector<Accum> acc(nh);
    for (int s = 0; s < kShards; ++s)
        for (int i = 0; i < nh; ++i) {
            acc[i].g += shard_acc[s][i].g;
            acc[i].g2 += shard_acc[s][i].g2;
            acc[i].l += shard_acc[s][i].l;
            acc[i].l2 += shard_acc[s][i].l2;
            acc[i].r += shard_acc[s][i].r;
            acc[i].r2 += shard_acc[s][i].r2;
        }

    BalanceReport rep;
    rep.n_mc = n_mc;
    rep.shared_stream = shared_stream;
    for (int idx = 0; idx < basis.size(); ++idx) {
        BalanceEntry e;
        e.label = basis.label(idx);
        if (basis.xmode_of(idx) != 0) {
            // Nonconstant spatial factor integrates to zero over the torus.
            e.exact_zero = true;
        } else {
            finish_entry(e, acc[basis.hermite_of(idx)], double(n_mc), shared_stream);
            rep.max_abs_z = std::max(rep.max_abs_z, std::abs(e.z));
            rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(e.residual));
        }
        rep.entries.push_back(std::move(e));
    }
    rep.pass = shared_stream ? rep.max_abs_residual <= 1e-12 : rep.max_abs_z <= 3.0;
    return rep;
}

BalanceEntry equilibrium_balance_single(const TestFunction& tf, const DomainParams& dom,
                                        std::int64_t n_mc, std::uint64_t base_seed,
                                        bool shared_stream) {
    int d = dom.d;
    double pref = dom.mu_eps * std::pow(dom.eps, d - 1);
    Accum acc;

    auto run = [&](bool with_ratio, bool also_loss, RngTag tag) {
        auto rng = make_rng(base_seed, {tag});
        for (std::int64_t it = 0; it < n_mc; ++it) {
            Vec x = uniform_position(d, rng);
            Vec v = maxwellian_sample(d, rng);
            Vec u = maxwellian_sample(d, rng);
            Vec omega = uniform_sphere(d, rng);
            double c = dot(u - v, omega);
            if (c < 0) {
                omega = omega * -1.0;
                c = -c;
            }
            double w = pref * c * sphere_area(d) * 0.5;
            Vec vp = v + omega * c;
            Vec up = u - omega * c;
            double ratio = std::exp(0.5 * (norm2(v) + norm2(u) - norm2(vp) - norm2(up)));
            double phi;
            if (shared_stream) {
                phi = 0.25 * (eval(tf, x, v, dom) + eval(tf, x, u, dom) + eval(tf, x, vp, dom) +
                              eval(tf, x, up, dom));
            } else {
                phi = eval(tf, x, v, dom);
            }
            if (with_ratio) {
                double g = w * phi * ratio;
                acc.g += g;
                acc.g2 += g * g;
            }
            if (also_loss) {
                double l = w * phi;
                acc.l += l;
                acc.l2 += l * l;
                if (shared_stream) {
                    double r = w * phi * (ratio - 1.0);
                    acc.r += r;
                    acc.r2 += r * r;
                }
            }
        }
    };

    if (shared_stream) {
        run(true, true, tag_balance_gain);
    } else {
        run(true, false, tag_balance_gain);
        run(false, true, tag_balance_loss);
    }
    BalanceEntry e;
    e.label = tf.id();
    finish_entry(e, acc, double(n_mc), shared_stream);
    return e;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
    char buf[40];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            os << (j ? "," : "") << buf;
        }
        os << "\n";
    }
}

std::string matrix_header_json(const std::string& kind, const GalerkinBasis& basis,
                               std::int64_t n_mc, double max_mc_error) {
    nlohmann::json j;
    j["kind"] = kind;
    j["dim"] = basis.dim();
    j["fourier_cutoff"] = basis.fourier_cutoff();
    j["hermite_cutoff"] = basis.hermite_cutoff();
    j["size"] = basis.size();
    j["n_mc"] = n_mc;
    j["max_mc_error"] = max_mc_error;
    std::vector<std::string> labels;
    for (int i = 0; i < basis.size(); ++i) labels.push_back(basis.label(i));
    j["elements"] = labels;
    return j.dump(2);
}

}  // namespace fluctsim
