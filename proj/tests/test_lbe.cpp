#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fluctsim/basis.hpp"
#include "fluctsim/covariance.hpp"
#include "fluctsim/generator.hpp"
#include "fluctsim/maxwellian.hpp"
#include "fluctsim/ou.hpp"
#include "fluctsim/rng.hpp"

using namespace fluctsim;

namespace {

// Spatial factor and its gradient for one x-mode, used by the independent
// Monte Carlo estimate of the transport couplings.
double xmode_eval(const GalerkinBasis::XMode& m, const Vec& x, int d, Vec* grad) {
    double phase = 0.0;
    for (int i = 0; i < d; ++i) phase += m.k[i] * x[i];
    phase *= 2.0 * M_PI;
    double r2 = std::sqrt(2.0);
    switch (m.trig) {
        case GalerkinBasis::trig_const:
            *grad = Vec();
            return 1.0;
        case GalerkinBasis::trig_cos:
            for (int i = 0; i < d; ++i) (*grad)[i] = -2.0 * M_PI * m.k[i] * r2 * std::sin(phase);
            return r2 * std::cos(phase);
        default:
            for (int i = 0; i < d; ++i) (*grad)[i] = 2.0 * M_PI * m.k[i] * r2 * std::cos(phase);
            return r2 * std::sin(phase);
    }
}

}  // namespace

TEST_CASE("basis enumeration and flat indexing") {
    GalerkinBasis b2(2, 1, 2);
    CHECK(b2.dim() == 2);
    CHECK(b2.n_xmodes() == 9);   // constant + (cos, sin) for 4 positive vectors
    CHECK(b2.n_hermite() == 6);  // degrees 0, 1, 2 in two variables
    CHECK(b2.size() == 54);
    GalerkinBasis b3(3, 1, 2);
    CHECK(b3.n_xmodes() == 27);  // constant + 2 * 13
    CHECK(b3.n_hermite() == 10);
    CHECK(b3.size() == 270);

    for (int idx = 0; idx < b2.size(); ++idx) {
        CHECK(b2.flat_index(b2.xmode_of(idx), b2.hermite_of(idx)) == idx);
        CHECK(b2.hermite_of(idx) < b2.n_hermite());
        CHECK(b2.xmode_of(idx) < b2.n_xmodes());
    }
    // The first x-mode is the constant; the Hermite list is graded.
    CHECK(b2.xmodes()[0].trig == GalerkinBasis::trig_const);
    CHECK(b2.hermite_indices()[0] == MultiIndex{0, 0, 0});
    CHECK(b2.hermite_position({0, 2, 0}) >= 0);
    CHECK(b2.hermite_position({3, 0, 0}) == -1);
    CHECK(b2.hermite_position({0, 0, 1}) == -1);  // third component unused in d=2

    auto xonly = b2.x_only_indices();
    CHECK(int(xonly.size()) == b2.n_xmodes());
    for (int idx : xonly) CHECK(b2.hermite_of(idx) == 0);

    std::set<std::string> labels;
    for (int idx = 0; idx < b2.size(); ++idx) labels.insert(b2.label(idx));
    CHECK(int(labels.size()) == b2.size());
}

TEST_CASE("basis elements evaluate as declared test functions") {
    GalerkinBasis basis(2, 1, 2);
    DomainParams dom(2, 0.02);
    std::mt19937_64 rng(401);
    std::vector<double> all(basis.size());
    for (int t = 0; t < 50; ++t) {
        Vec x = uniform_position(2, rng), v = maxwellian_sample(2, rng);
        basis.eval_all(x, v, all.data());
        for (int idx = 0; idx < basis.size(); ++idx) {
            double direct = basis.eval(idx, x, v);
            CHECK(direct == doctest::Approx(all[idx]).epsilon(1e-13));
            CHECK(direct ==
                  doctest::Approx(eval(basis.element(idx), x, v, dom)).epsilon(1e-12));
            // Factorization against the building blocks.
            Vec grad;
            double xf = xmode_eval(basis.xmodes()[basis.xmode_of(idx)], x, 2, &grad);
            double hf = hermite_multi(basis.hermite_indices()[basis.hermite_of(idx)], v, 2);
            CHECK(direct == doctest::Approx(xf * hf).epsilon(1e-12));
        }
    }
}

TEST_CASE("coefficient expansion reproduces functions inside the span") {
    GalerkinBasis basis(2, 1, 2);
    DomainParams dom(2, 0.02);
    std::mt19937_64 rng(403);

    // Every element maps to a unit coordinate vector.
    for (int idx : {0, 7, 23, 53}) {
        auto c = basis.coefficients(basis.element(idx));
        REQUIRE(int(c.size()) == basis.size());
        for (int j = 0; j < basis.size(); ++j)
            CHECK(c[j] == doctest::Approx(j == idx ? 1.0 : 0.0).epsilon(1e-12));
    }

    // Invariants expand exactly and reproduce pointwise values.
    for (auto kind : {CollisionInvariant::mass, CollisionInvariant::momentum,
                      CollisionInvariant::energy}) {
        TestFunction tf(CollisionInvariant{kind, 1});
        auto c = basis.coefficients(tf);
        for (int t = 0; t < 30; ++t) {
            Vec x = uniform_position(2, rng), v = maxwellian_sample(2, rng);
            double series = 0.0;
            for (int j = 0; j < basis.size(); ++j)
                if (c[j] != 0.0) series += c[j] * basis.eval(j, x, v);
            CHECK(series == doctest::Approx(eval(tf, x, v, dom)).epsilon(1e-11));
        }
    }

    // Outside the span: wavevector beyond the cutoff, degree beyond the
    // cutoff, and opaque custom nodes all raise.
    CHECK_THROWS_AS(basis.coefficients(TestFunction(FourierHermite{{2, 0, 0}, {0, 0, 0}})),
                    std::invalid_argument);
    CHECK_THROWS_AS(basis.coefficients(TestFunction(FourierHermite{{1, 0, 0}, {3, 0, 0}})),
                    std::invalid_argument);
    CustomFn cf;
    cf.f = [](const Vec&, const Vec&) { return 1.0; };
    CHECK_THROWS_AS(basis.coefficients(TestFunction(cf)), std::invalid_argument);
}

TEST_CASE("invariant directions are orthonormal and x-homogeneous") {
    for (int d : {2, 3}) {
        GalerkinBasis basis(d, 1, 2);
        auto dirs = basis.invariant_directions();
        REQUIRE(int(dirs.size()) == d + 2);  // mass, d momenta, energy
        for (std::size_t a = 0; a < dirs.size(); ++a) {
            REQUIRE(int(dirs[a].size()) == basis.size());
            for (std::size_t b = 0; b < dirs.size(); ++b) {
                double dot_ab = 0.0;
                for (int j = 0; j < basis.size(); ++j) dot_ab += dirs[a][j] * dirs[b][j];
                CHECK(dot_ab == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-12));
            }
            // Support is confined to the constant x-mode.
            for (int j = 0; j < basis.size(); ++j)
                if (basis.xmode_of(j) != 0) CHECK(dirs[a][j] == 0.0);
        }
    }
}

TEST_CASE("transport matrix is exactly antisymmetric with the right sparsity") {
    GalerkinBasis basis(2, 1, 2);
    Eigen::MatrixXd T = transport_matrix(basis);
    REQUIRE(T.rows() == basis.size());
    CHECK((T + T.transpose()).cwiseAbs().maxCoeff() == 0.0);
    // Streaming cannot couple different wavevectors, and it moves exactly one
    // Hermite degree.
    for (int a = 0; a < basis.size(); ++a)
        for (int b = 0; b < basis.size(); ++b) {
            if (T(a, b) == 0.0) continue;
            const auto& ma = basis.xmodes()[basis.xmode_of(a)];
            const auto& mb = basis.xmodes()[basis.xmode_of(b)];
            CHECK(ma.k == mb.k);
            CHECK(ma.trig != mb.trig);  // cos pairs with sin
            int da = multi_degree(basis.hermite_indices()[basis.hermite_of(a)]);
            int db = multi_degree(basis.hermite_indices()[basis.hermite_of(b)]);
            CHECK(std::abs(da - db) == 1);
        }
}

TEST_CASE("transport couplings agree with direct Monte Carlo quadrature") {
    GalerkinBasis basis(2, 1, 2);
    Eigen::MatrixXd T = transport_matrix(basis);
    auto rng = make_rng(1, {tag_generator_b, 77});
    // A deterministic selection of entries, including known nonzero ones.
    std::vector<std::pair<int, int>> picks;
    for (int a = 0; a < basis.size(); a += 7)
        for (int b = 0; b < basis.size(); b += 11) picks.push_back({a, b});
    const long n = 200000;
    for (auto [a, b] : picks) {
        int axm = basis.xmode_of(a), bxm = basis.xmode_of(b);
        const auto& ha = basis.hermite_indices()[basis.hermite_of(a)];
        const auto& hb = basis.hermite_indices()[basis.hermite_of(b)];
        double sum = 0.0, sum2 = 0.0;
        for (long s = 0; s < n; ++s) {
            Vec x = uniform_position(2, rng), v = maxwellian_sample(2, rng);
            Vec ga, gb;
            double xa = xmode_eval(basis.xmodes()[axm], x, 2, &ga);
            xmode_eval(basis.xmodes()[bxm], x, 2, &gb);
            // Transport enters the generator as -v . grad.
            double val = -xa * hermite_multi(ha, v, 2) * dot(v, gb) * hermite_multi(hb, v, 2);
            sum += val;
            sum2 += val * val;
        }
        double mean = sum / n;
        double se = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
        CHECK(std::fabs(T(a, b) - mean) < 5.0 * se + 1e-10);
    }
}

TEST_CASE("assembled generator satisfies the structural identities") {
    GalerkinBasis basis(2, 1, 2);
    const std::int64_t n_mc = 200000;
    GeneratorMatrix gen = assemble_generator(basis, n_mc, 1);
    NoiseMatrix noise = assemble_noise(basis, n_mc, 1);
    Eigen::MatrixXd T = transport_matrix(basis);

    CHECK(gen.n_mc == n_mc);
    CHECK(gen.dim == 2);
    CHECK(gen.B.rows() == 54);
    CHECK(gen.mc_error.minCoeff() >= 0.0);

    SUBCASE("collision block replicates across x-modes") {
        Eigen::MatrixXd coll = gen.B - T;
        int nh = basis.n_hermite();
        Eigen::MatrixXd block0 = coll.block(0, 0, nh, nh);
        for (int ix = 0; ix < basis.n_xmodes(); ++ix)
            for (int jx = 0; jx < basis.n_xmodes(); ++jx) {
                Eigen::MatrixXd blk = coll.block(ix * nh, jx * nh, nh, nh);
                if (ix == jx)
                    CHECK((blk - block0).cwiseAbs().maxCoeff() == 0.0);
                else
                    CHECK(blk.cwiseAbs().maxCoeff() == 0.0);
            }
        Eigen::MatrixXd nblock0 = noise.C.block(0, 0, nh, nh);
        for (int ix = 0; ix < basis.n_xmodes(); ++ix)
            for (int jx = 0; jx < basis.n_xmodes(); ++jx) {
                Eigen::MatrixXd blk = noise.C.block(ix * nh, jx * nh, nh, nh);
                if (ix == jx)
                    CHECK((blk - nblock0).cwiseAbs().maxCoeff() == 0.0);
                else
                    CHECK(blk.cwiseAbs().maxCoeff() == 0.0);
            }
    }

    SUBCASE("noise matrix is symmetric and positive semidefinite after clipping") {
        CHECK((noise.C - noise.C.transpose()).cwiseAbs().maxCoeff() < 1e-13);
        Eigen::MatrixXd S = noise_sqrt(noise);
        CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        // S^2 recovers C up to the clipped negative part.
        double mc_scale = 3.0 * noise.mc_error.maxCoeff() * noise.C.rows();
        CHECK((S * S - noise.C).cwiseAbs().maxCoeff() < mc_scale + 1e-10);
    }

    SUBCASE("fluctuation-dissipation residual within Monte Carlo error") {
        FdReport fd = fd_check(gen, noise);
        INFO(fd.detail);
        CHECK(fd.pass);
        CHECK(fd.max_z < 5.0);
        CHECK(fd.max_exact_residual < 1e-12);
        CHECK(fd.n_mc_entries > 0);
    }

    SUBCASE("dissipativity of the symmetric part") {
        DissipativityReport diss = dissipativity_check(gen);
        CHECK(diss.pass);
        CHECK(diss.max_sym_eigenvalue <= diss.tol);
    }

    SUBCASE("invariant directions are annihilated") {
        auto dirs = basis.invariant_directions();
        for (const auto& w : dirs) {
            Eigen::Map<const Eigen::VectorXd> wv(w.data(), w.size());
            CHECK((gen.B * wv).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((noise.C * wv).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("generator assembly is deterministic and worker-independent") {
    GalerkinBasis basis(2, 1, 2);
    GeneratorMatrix a = assemble_generator(basis, 100000, 5, 1);
    GeneratorMatrix b = assemble_generator(basis, 100000, 5, 2);
    CHECK((a.B - b.B).cwiseAbs().maxCoeff() == 0.0);
    GeneratorMatrix c = assemble_generator(basis, 100000, 6, 1);
    CHECK((a.B - c.B).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("equilibrium balance: shared stream collapses, split streams agree") {
    GalerkinBasis basis(2, 1, 2);
    DomainParams dom(2, 0.02);

    BalanceReport shared = equilibrium_balance(basis, dom, 1000000, 1, true);
    CHECK(shared.pass);
    CHECK(shared.shared_stream);
    CHECK(int(shared.entries.size()) == basis.size());
    CHECK(shared.max_abs_residual < 1e-12);
    int exact_zeros = 0;
    for (const auto& e : shared.entries)
        if (e.exact_zero) ++exact_zeros;
    // Everything off the constant x-mode integrates to zero over the torus.
    CHECK(exact_zeros == basis.size() - basis.n_hermite());

    BalanceReport split = equilibrium_balance(basis, dom, 1000000, 1, false);
    CHECK(split.pass);
    CHECK(split.max_abs_z < 4.0);
    for (const auto& e : split.entries) {
        if (e.exact_zero) continue;
        CHECK(e.combined_se > 0.0);
        CHECK(std::fabs(e.residual) <= 4.0 * e.combined_se + 1e-12);
    }

    // Collision invariants balance identically, stream sharing or not.
    BalanceEntry en = equilibrium_balance_single(
        TestFunction(CollisionInvariant{CollisionInvariant::energy, 0}), dom, 50000, 3, false);
    CHECK(std::fabs(en.z) < 4.0);
}

TEST_CASE("propagated covariance: exponential and RK4 agree") {
    GalerkinBasis basis(2, 1, 2);
    GeneratorMatrix gen = assemble_generator(basis, 100000, 1);
    std::mt19937_64 rng(409);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> g(basis.size()), h(basis.size());
    for (auto& x : g) x = n01(rng);
    for (auto& x : h) x = n01(rng);

    std::vector<double> grid = {0.0, 0.25, 0.5, 1.0, 2.0};
    CovarianceCurve a = propagate_covariance(gen, g, h, grid);
    CovarianceCurve b = propagate_covariance_rk4(gen, g, h, grid);
    REQUIRE(a.t.size() == grid.size());
    REQUIRE(b.t.size() == grid.size());
    double dot_gh = 0.0;
    for (int j = 0; j < basis.size(); ++j) dot_gh += g[j] * h[j];
    CHECK(a.value[0] == doctest::Approx(dot_gh).epsilon(1e-14));
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK(std::fabs(a.value[i] - b.value[i]) < 1e-8);
    // The damped dynamics contracts this quadratic form from its t=0 value.
    CHECK(std::fabs(a.value.back()) < std::fabs(a.value[0]));

    CHECK_THROWS_AS(propagate_covariance(gen, g, h, {-1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(propagate_covariance(gen, g, h, {0.0, 0.0}), std::invalid_argument);
    std::vector<double> short_g(3, 0.0);
    CHECK_THROWS_AS(propagate_covariance(gen, short_g, h, grid), std::invalid_argument);
}

TEST_CASE("step-size policy") {
    GalerkinBasis basis(2, 1, 2);
    GeneratorMatrix gen = assemble_generator(basis, 100000, 1);
    double nb = generator_norm(gen);
    CHECK(nb > 1.0);
    double bound = accuracy_dt_bound(gen);
    CHECK(bound == doctest::Approx(std::min(0.1 / nb, 0.02 / (nb * nb))));
    double dt = commensurate_dt(0.25, bound);
    CHECK(dt <= bound * (1.0 + 1e-12));
    double ratio = 0.25 / dt;
    CHECK(std::fabs(ratio - std::round(ratio)) < 1e-9);
}

TEST_CASE("scalar Langevin simulation reproduces the known law") {
    // One-dimensional system dX = -X dt + sqrt(2) dW: stationary variance 1,
    // lag-t covariance exp(-t).
    GeneratorMatrix gen;
    gen.B = Eigen::MatrixXd::Constant(1, 1, -1.0);
    gen.mc_error = Eigen::MatrixXd::Zero(1, 1);
    gen.dim = 2;
    NoiseMatrix noise;
    noise.C = Eigen::MatrixXd::Constant(1, 1, 2.0);
    noise.mc_error = Eigen::MatrixXd::Zero(1, 1);

    OUOptions opts;
    opts.dt = commensurate_dt(0.25, accuracy_dt_bound(gen));
    opts.t_end = 40.0;
    opts.n_paths = 80;
    opts.record_dt = 0.25;
    opts.lag_times = {0.25, 1.0};
    opts.keep_paths = 2;
    OUResult res = ou_simulate(gen, noise, opts, 1);

    CHECK(res.n_paths == 80);
    CHECK(res.b_norm == doctest::Approx(1.0));
    CHECK(res.n_steps == std::lround(40.0 / opts.dt));
    CHECK(res.n_recorded == 161);  // t = 0, 0.25, ..., 40
    REQUIRE(int(res.sample_paths.size()) == 2);
    CHECK(res.sample_paths[0].rows() == res.n_recorded);

    double var = res.stationary_cov(0, 0), var_se = res.stationary_se(0, 0);
    CHECK(var_se > 0.0);
    CHECK(std::fabs(var - 1.0) < 4.0 * var_se + 0.02);
    for (std::size_t li = 0; li < res.lag_times.size(); ++li) {
        double target = std::exp(-res.lag_times[li]);
        CHECK(std::fabs(res.lagged_cov[li](0, 0) - target) <
              4.0 * res.lagged_se[li](0, 0) + 0.02);
    }
}

TEST_CASE("frozen system keeps its initial Gaussian forever") {
    GeneratorMatrix gen;
    gen.B = Eigen::MatrixXd::Zero(2, 2);
    gen.mc_error = Eigen::MatrixXd::Zero(2, 2);
    NoiseMatrix noise;
    noise.C = Eigen::MatrixXd::Zero(2, 2);
    noise.mc_error = Eigen::MatrixXd::Zero(2, 2);

    OUOptions opts;
    opts.dt = 0.05;
    opts.t_end = 2.0;
    opts.n_paths = 300;
    opts.record_dt = 0.25;
    opts.lag_times = {0.5};
    opts.keep_paths = 1;
    OUResult res = ou_simulate(gen, noise, opts, 2);

    // Paths are constant, so stationary and lagged covariances coincide and
    // estimate the identity from 300 frozen draws.
    const Eigen::MatrixXd& path = res.sample_paths[0];
    for (int r = 1; r < path.rows(); ++r)
        CHECK((path.row(r) - path.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((res.stationary_cov - res.lagged_cov[0]).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double target = i == j ? 1.0 : 0.0;
            CHECK(std::fabs(res.stationary_cov(i, j) - target) < 0.35);
        }
}

TEST_CASE("simulation options are validated") {
    GeneratorMatrix gen;
    gen.B = Eigen::MatrixXd::Constant(1, 1, -1.0);
    gen.mc_error = Eigen::MatrixXd::Zero(1, 1);
    NoiseMatrix noise;
    noise.C = Eigen::MatrixXd::Constant(1, 1, 2.0);
    noise.mc_error = Eigen::MatrixXd::Zero(1, 1);

    OUOptions ok;
    ok.dt = 0.05;
    ok.t_end = 1.0;
    ok.n_paths = 2;
    ok.record_dt = 0.25;
    ok.lag_times = {0.25};

    auto expect_throw = [&](auto mutate) {
        OUOptions bad = ok;
        mutate(bad);
        CHECK_THROWS_AS(ou_simulate(gen, noise, bad, 1), std::invalid_argument);
    };
    expect_throw([](OUOptions& o) { o.dt = 0.0; });
    expect_throw([](OUOptions& o) { o.dt = 0.2; });          // above 0.1 / |B|
    expect_throw([](OUOptions& o) { o.record_dt = 0.13; });  // not a multiple of dt
    expect_throw([](OUOptions& o) { o.lag_times = {0.3}; }); // not a multiple of record_dt
    expect_throw([](OUOptions& o) { o.lag_times = {0.75}; }); // beyond t_end / 2
    expect_throw([](OUOptions& o) { o.n_paths = 0; });
    CHECK_NOTHROW(ou_simulate(gen, noise, ok, 1));
}

TEST_CASE("negative noise beyond tolerance aborts the square root") {
    NoiseMatrix noise;
    noise.C = -Eigen::MatrixXd::Identity(3, 3);
    noise.mc_error = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(noise_sqrt(noise), std::runtime_error);
    // Small negative eigenvalues inside the Monte Carlo band are clipped.
    noise.C = -1e-6 * Eigen::MatrixXd::Identity(3, 3);
    noise.mc_error = Eigen::MatrixXd::Constant(3, 3, 1e-5);
    Eigen::MatrixXd S = noise_sqrt(noise);
    CHECK(S.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("matrix and curve output formats") {
    // Matrices are written as a plain dense grid, one matrix row per line;
    // the companion JSON header carries the metadata.
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 2.5, -3.0, 0.125;
    std::stringstream ss;
    write_matrix_csv(ss, m);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "1,2.5");
    std::getline(ss, line);
    CHECK(line == "-3,0.125");
    CHECK_FALSE(std::getline(ss, line));

    GalerkinBasis basis(2, 1, 2);
    std::string hdr = matrix_header_json("generator", basis, 1000, 0.25);
    CHECK(hdr.find("\"kind\"") != std::string::npos);
    CHECK(hdr.find("generator") != std::string::npos);
    CHECK(hdr.find("1000") != std::string::npos);

    CovarianceCurve curve;
    curve.t = {0.0, 0.5};
    curve.value = {1.0, 0.25};
    std::stringstream cs;
    write_curve_csv(cs, curve);
    std::getline(cs, line);
    CHECK(line == "t,value");
    std::getline(cs, line);
    CHECK(line == "0,1");
}
