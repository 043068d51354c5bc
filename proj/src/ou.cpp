#include "fluctsim/ou.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "fluctsim/parallel.hpp"
#include "fluctsim/rng.hpp"

namespace fluctsim {

double generator_norm(const GeneratorMatrix& gen) {
    double n1 = gen.B.cwiseAbs().colwise().sum().maxCoeff();
    double ninf = gen.B.cwiseAbs().rowwise().sum().maxCoeff();
    return std::sqrt(n1 * ninf);
}

double accuracy_dt_bound(const GeneratorMatrix& gen) {
    double nb = std::max(generator_norm(gen), 1e-300);
    return std::min(0.1 / nb, 0.02 / (nb * nb));
}

double commensurate_dt(double record_dt, double dt_bound) {
    if (!(record_dt > 0) || !(dt_bound > 0))
        throw std::invalid_argument("commensurate_dt: arguments must be positive");
    int k = std::max(1, int(std::ceil(record_dt / dt_bound - 1e-12)));
    return record_dt / k;
}

Eigen::MatrixXd noise_sqrt(const NoiseMatrix& noise) {
    Eigen::MatrixXd S = 0.5 * (noise.C + noise.C.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::MatrixXd E = 3.0 * noise.mc_error;
    double n1 = E.cwiseAbs().colwise().sum().maxCoeff();
    double ninf = E.cwiseAbs().rowwise().sum().maxCoeff();
    double tol = std::sqrt(n1 * ninf);
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < lam.size(); ++i) {
        if (lam[i] < -tol)
            throw std::runtime_error(
                "noise_sqrt: eigenvalue " + std::to_string(lam[i]) +
                " below the Monte Carlo tolerance " + std::to_string(-tol) +
                "; the noise matrix is not positive semidefinite");
        if (lam[i] < 0) lam[i] = 0.0;
    }
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

OUResult ou_simulate(const GeneratorMatrix& gen, const NoiseMatrix& noise, const OUOptions& opts,
                     std::uint64_t base_seed, int n_workers) {
    const int n = int(gen.B.rows());
    if (noise.C.rows() != n) throw std::invalid_argument("ou_simulate: basis mismatch");
    if (opts.n_paths < 1) throw std::invalid_argument("ou_simulate: n_paths must be >= 1");
    if (!(opts.dt > 0) || !(opts.t_end > 0))
        throw std::invalid_argument("ou_simulate: dt and t_end must be positive");
    double bound = 0.1 / std::max(generator_norm(gen), 1e-300);
    if (opts.dt > bound * (1 + 1e-12))
        throw std::invalid_argument("ou_simulate: dt exceeds the stability budget 0.1/|B| = " +
                                    std::to_string(bound));
    long stride = std::lround(opts.record_dt / opts.dt);
    if (stride < 1 || std::abs(stride * opts.dt - opts.record_dt) > 1e-9)
        throw std::invalid_argument("ou_simulate: record_dt must be a positive multiple of dt");
    std::vector<long> lag_steps;
    for (double L : opts.lag_times) {
        long m = std::lround(L / opts.record_dt);
        if (m < 0 || std::abs(m * opts.record_dt - L) > 1e-9)
            throw std::invalid_argument("ou_simulate: lag times must be multiples of record_dt");
        if (L > 0.5 * opts.t_end + 1e-12)
            throw std::invalid_argument("ou_simulate: lag " + std::to_string(L) +
                                        " exceeds half the simulated span");
        lag_steps.push_back(m);
    }

    const std::int64_t n_steps = std::llround(opts.t_end / opts.dt);
    const int n_rec = int(n_steps / stride) + 1;  // includes the initial state
    const int n_lags = int(lag_steps.size());
    const Eigen::MatrixXd sqrtC = noise_sqrt(noise);
    const Eigen::MatrixXd& B = gen.B;
    const double sdti = std::sqrt(opts.dt);

    const int n_chunks = std::min(64, opts.n_paths);
    struct Chunk {
        Eigen::MatrixXd stat_sum, stat_sum2;
        std::vector<Eigen::MatrixXd> lag_sum, lag_sum2;
        std::vector<Eigen::MatrixXd> kept;
    };
    std::vector<Chunk> chunks(n_chunks);
    auto path_range = [&](int c) {
        int lo = int(std::int64_t(opts.n_paths) * c / n_chunks);
        int hi = int(std::int64_t(opts.n_paths) * (c + 1) / n_chunks);
        return std::pair<int, int>(lo, hi);
    };

    parallel_for_shards(n_chunks, resolve_workers(n_workers), [&](int c) {
        Chunk& ck = chunks[c];
        ck.stat_sum = Eigen::MatrixXd::Zero(n, n);
        ck.stat_sum2 = Eigen::MatrixXd::Zero(n, n);
        ck.lag_sum.assign(n_lags, Eigen::MatrixXd::Zero(n, n));
        ck.lag_sum2.assign(n_lags, Eigen::MatrixXd::Zero(n, n));
        auto [lo, hi] = path_range(c);
        Eigen::MatrixXd rec(n_rec, n);
        Eigen::VectorXd x(n), xi(n);
        Eigen::MatrixXd stat_acc(n, n);
        std::vector<Eigen::MatrixXd> lag_acc(n_lags, Eigen::MatrixXd(n, n));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int p = lo; p < hi; ++p) {
            auto rng = make_rng(base_seed, {tag_ou, std::uint64_t(p)});
            for (int i = 0; i < n; ++i) x[i] = gauss(rng);
            rec.row(0) = x;
            int r = 1;
            for (std::int64_t s = 1; s <= n_steps; ++s) {
                for (int i = 0; i < n; ++i) xi[i] = gauss(rng);
                x += opts.dt * (B * x) + sdti * (sqrtC * xi);
                if (s % stride == 0) rec.row(r++) = x;
            }
            // Per-path time averages on the recorded grid.
            stat_acc.setZero();
            for (int i = 0; i < n_rec; ++i) stat_acc += rec.row(i).transpose() * rec.row(i);
            stat_acc /= double(n_rec);
            ck.stat_sum += stat_acc;
            ck.stat_sum2 += stat_acc.cwiseProduct(stat_acc);
            for (int li = 0; li < n_lags; ++li) {
                long m = lag_steps[li];
                lag_acc[li].setZero();
                int cnt = n_rec - int(m);
                for (int i = 0; i < cnt; ++i)
                    lag_acc[li] += rec.row(i).transpose() * rec.row(i + m);
                lag_acc[li] /= double(cnt);
                ck.lag_sum[li] += lag_acc[li];
                ck.lag_sum2[li] += lag_acc[li].cwiseProduct(lag_acc[li]);
            }
            if (p < opts.keep_paths) ck.kept.push_back(rec);
        }
    });

    OUResult out;
    out.dt = opts.dt;
    out.record_dt = opts.record_dt;
    out.n_steps = n_steps;
    out.n_recorded = n_rec;
    out.n_paths = opts.n_paths;
    out.b_norm = generator_norm(gen);
    out.lag_times = opts.lag_times;

    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(n, n), s2 = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::MatrixXd> l1(n_lags, Eigen::MatrixXd::Zero(n, n));
    std::vector<Eigen::MatrixXd> l2(n_lags, Eigen::MatrixXd::Zero(n, n));
    for (int c = 0; c < n_chunks; ++c) {
        s1 += chunks[c].stat_sum;
        s2 += chunks[c].stat_sum2;
        for (int li = 0; li < n_lags; ++li) {
            l1[li] += chunks[c].lag_sum[li];
            l2[li] += chunks[c].lag_sum2[li];
        }
        for (auto& rec : chunks[c].kept) out.sample_paths.push_back(std::move(rec));
    }
    double np = double(opts.n_paths);
    auto mean_se = [np, n](const Eigen::MatrixXd& sum, const Eigen::MatrixXd& sum2,
                           Eigen::MatrixXd& mean, Eigen::MatrixXd& se) {
        mean = sum / np;
        if (np < 2) {
            se = Eigen::MatrixXd::Zero(n, n);
            return;
        }
        Eigen::MatrixXd var =
            ((sum2 - sum.cwiseProduct(mean)) / (np - 1.0)).cwiseMax(0.0);
        se = (var / np).cwiseSqrt();
    };
    mean_se(s1, s2, out.stationary_cov, out.stationary_se);
    out.lagged_cov.resize(n_lags);
    out.lagged_se.resize(n_lags);
    for (int li = 0; li < n_lags; ++li)
        mean_se(l1[li], l2[li], out.lagged_cov[li], out.lagged_se[li]);
    return out;
}

}  // namespace fluctsim
