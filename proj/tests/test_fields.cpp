#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fluctsim/fields.hpp"
#include "fluctsim/maxwellian.hpp"
#include "fluctsim/rng.hpp"

using namespace fluctsim;

namespace {

SystemState random_state(int d, double eps, int n, std::mt19937_64& rng) {
    SystemState s;
    s.dom = DomainParams(d, eps);
    s.particles.resize(n);
    for (auto& p : s.particles) {
        p.x = uniform_position(d, rng);
        p.v = maxwellian_sample(d, rng);
    }
    return s;
}

TestFunction custom(double (*f)(const Vec&, const Vec&), const char* label) {
    CustomFn cf;
    cf.f = f;
    cf.label = label;
    return TestFunction(cf);
}

// Distinct-tuple field by literal enumeration for any factor count (the
// library's enumerated version stops at m = 3, but centered products go
// higher). O(N^m), so keep N small.
double enumerate_any_m(const SystemState& s, const std::vector<TestFunction>& factors) {
    int m = int(factors.size());
    int n = s.n();
    std::vector<std::vector<double>> vals(m, std::vector<double>(n));
    for (int p = 0; p < m; ++p)
        for (int i = 0; i < n; ++i)
            vals[p][i] = eval(factors[p], s.particles[i].x, s.particles[i].v, s.dom);
    std::vector<int> idx(m, 0);
    double sum = 0.0;
    while (true) {
        bool distinct = true;
        for (int a = 0; a < m && distinct; ++a)
            for (int b = a + 1; b < m; ++b)
                if (idx[a] == idx[b]) {
                    distinct = false;
                    break;
                }
        if (distinct) {
            double prod = 1.0;
            for (int p = 0; p < m; ++p) prod *= vals[p][idx[p]];
            sum += prod;
        }
        int pos = m - 1;
        while (pos >= 0 && ++idx[pos] == n) idx[pos--] = 0;
        if (pos < 0) break;
    }
    return sum / std::pow(s.dom.mu_eps, m);
}

// Reference for ostar_product: expand the subset sum literally, with every
// multi-particle field evaluated by tuple enumeration.
double ostar_reference(const SystemState& s, const std::vector<OstarFactor>& factors) {
    int nb = int(factors.size());
    double total = 0.0;
    for (int mask = 0; mask < (1 << nb); ++mask) {
        std::vector<TestFunction> tensor;
        double coeff = 1.0;
        for (int j = 0; j < nb; ++j) {
            if (mask & (1 << j))
                for (const auto& h : factors[j].h) tensor.push_back(h);
            else
                coeff *= -factors[j].centering;
        }
        double pi = tensor.empty() ? 1.0 : enumerate_any_m(s, tensor);
        total += coeff * pi;
    }
    return std::pow(s.dom.mu_eps, 0.5 * nb) * total;
}

// Synthetic ensemble: raw[r][s] = mean + (L g)_s / sqrt(mu) with g standard
// normal, so the fluctuation fields are exactly Gaussian with covariance
// Sigma = L L^T.
MomentData gaussian_ensemble(int n_runs, double mu, std::uint64_t seed) {
    MomentData d;
    d.mu_eps = mu;
    d.slot_ids = {"s0", "s1", "s2"};
    d.slot_times = {0.0, 0.5, 1.0};
    const double L[3][3] = {{1.0, 0.0, 0.0}, {0.5, 0.8660254037844386, 0.0}, {0.2, 0.3, 0.9}};
    auto rng = make_rng(seed, {tag_fields});
    std::normal_distribution<double> n01(0.0, 1.0);
    d.raw.resize(n_runs);
    for (int r = 0; r < n_runs; ++r) {
        double g[3] = {n01(rng), n01(rng), n01(rng)};
        d.raw[r].resize(3);
        for (int s = 0; s < 3; ++s) {
            double z = L[s][0] * g[0] + L[s][1] * g[1] + L[s][2] * g[2];
            d.raw[r][s] = 0.7 + z / std::sqrt(mu);
        }
    }
    return d;
}

// Sigma = L L^T for the factor above.
const double kSigma[3][3] = {{1.0, 0.5, 0.2}, {0.5, 1.0, 0.3598076211353316},
                             {0.2, 0.3598076211353316, 0.94}};

}  // namespace

TEST_CASE("empirical_field is the normalized sum over particles") {
    std::mt19937_64 rng(301);
    SystemState s = random_state(2, 0.02, 7, rng);
    TestFunction h = custom([](const Vec& x, const Vec& v) { return x[0] + 2.0 * v[1]; }, "h");
    double direct = 0.0;
    for (const auto& p : s.particles) direct += p.x[0] + 2.0 * p.v[1];
    CHECK(empirical_field(s, h) == doctest::Approx(direct / s.dom.mu_eps).epsilon(1e-13));
    // Empty state gives zero.
    SystemState empty;
    empty.dom = s.dom;
    CHECK(empirical_field(empty, h) == 0.0);
}

TEST_CASE("power-sum evaluation matches tuple enumeration") {
    std::mt19937_64 rng(307);
    std::vector<TestFunction> pool = {
        custom([](const Vec& x, const Vec&) { return std::cos(2.0 * M_PI * x[0]); }, "c"),
        custom([](const Vec&, const Vec& v) { return v[0]; }, "v0"),
        custom([](const Vec& x, const Vec& v) { return x[1] * v[1]; }, "xv"),
        TestFunction(FourierHermite{{1, 0, 0}, {0, 1, 0}}),
    };
    for (int trial = 0; trial < 20; ++trial) {
        SystemState s = random_state(2, 0.05, 3 + int(rng() % 12), rng);
        for (int m = 1; m <= 3; ++m) {
            std::vector<TestFunction> factors;
            for (int i = 0; i < m; ++i) factors.push_back(pool[rng() % pool.size()]);
            double fast = m_particle_field(s, factors);
            double slow = m_particle_field_enumerated(s, factors);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
        }
    }
    SystemState s = random_state(2, 0.05, 5, rng);
    CHECK_THROWS_AS(m_particle_field(s, std::vector<TestFunction>(4, pool[0])),
                    std::invalid_argument);
    CHECK_THROWS_AS(m_particle_field_enumerated(s, {}), std::invalid_argument);
}

TEST_CASE("distinct-tuple sum identity for two factors") {
    // sum_{i != j} h_i g_j = (sum h)(sum g) - sum h_i g_i, scaled by mu^-2.
    std::mt19937_64 rng(311);
    SystemState s = random_state(2, 0.1, 9, rng);
    TestFunction h = custom([](const Vec& x, const Vec&) { return x[0]; }, "x0");
    TestFunction g = custom([](const Vec&, const Vec& v) { return v[1]; }, "v1");
    double sh = 0.0, sg = 0.0, shg = 0.0;
    for (const auto& p : s.particles) {
        sh += p.x[0];
        sg += p.v[1];
        shg += p.x[0] * p.v[1];
    }
    double mu = s.dom.mu_eps;
    CHECK(m_particle_field(s, {h, g}) ==
          doctest::Approx((sh * sg - shg) / (mu * mu)).epsilon(1e-12));
}

TEST_CASE("centered products match their literal subset expansion") {
    std::mt19937_64 rng(313);
    TestFunction h1 = custom([](const Vec& x, const Vec&) { return std::sin(2.0 * M_PI * x[1]); },
                             "s1");
    TestFunction h2 = custom([](const Vec&, const Vec& v) { return v[0] * v[0] - 1.0; }, "q0");
    TestFunction h3 = custom([](const Vec& x, const Vec& v) { return x[0] + v[1]; }, "m");
    for (int trial = 0; trial < 10; ++trial) {
        SystemState s = random_state(2, 0.1, 4 + int(rng() % 6), rng);
        std::uniform_real_distribution<double> uc(-0.5, 0.5);
        std::vector<OstarFactor> one = {{{h1}, uc(rng)}};
        CHECK(ostar_product(s, one) == doctest::Approx(ostar_reference(s, one)).epsilon(1e-11));
        std::vector<OstarFactor> two = {{{h1}, uc(rng)}, {{h2, h3}, uc(rng)}};
        CHECK(ostar_product(s, two) == doctest::Approx(ostar_reference(s, two)).epsilon(1e-11));
        std::vector<OstarFactor> three = {{{h1}, uc(rng)}, {{h2}, uc(rng)}, {{h3, h1}, uc(rng)}};
        CHECK(ostar_product(s, three) ==
              doctest::Approx(ostar_reference(s, three)).epsilon(1e-11));
    }
    SystemState s = random_state(2, 0.1, 4, rng);
    std::vector<OstarFactor> too_many(4, OstarFactor{{h1}, 0.0});
    CHECK_THROWS_AS(ostar_product(s, too_many), std::invalid_argument);
    std::vector<OstarFactor> heavy = {{{h1, h1, h1, h1}, 0.0}, {{h1, h1, h1}, 0.0}};
    CHECK_THROWS_AS(ostar_product(s, heavy), std::invalid_argument);
}

TEST_CASE("fluctuation_field scaling") {
    CHECK(fluctuation_field(0.8, 0.5, 100.0) == doctest::Approx(10.0 * 0.3));
    CHECK(fluctuation_field(0.5, 0.5, 100.0) == 0.0);
}

TEST_CASE("covariance estimates recover a known Gaussian covariance") {
    MomentData d = gaussian_ensemble(4000, 100.0, 2);
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
            CovarianceEstimate c = covariance_estimate(d, a, b);
            // Sampling error of a covariance of unit-scale Gaussians at
            // n = 4000 is about 0.02; the jackknife se should see that too.
            CHECK(c.std_error > 0.005);
            CHECK(c.std_error < 0.05);
            CHECK(std::fabs(c.value - kSigma[a][b]) < 4.0 * c.std_error);
            double rho = kSigma[a][b] / std::sqrt(kSigma[a][a] * kSigma[b][b]);
            CHECK(c.correlation == doctest::Approx(rho).epsilon(0.1));
            CHECK(c.fisher_lo <= c.correlation);
            CHECK(c.correlation <= c.fisher_hi);
            if (a != b) {
                CHECK(c.fisher_lo > rho - 0.15);
                CHECK(c.fisher_hi < rho + 0.15);
            }
        }
}

TEST_CASE("jackknife errors shrink like one over sqrt n") {
    MomentData big = gaussian_ensemble(4000, 100.0, 3);
    MomentData small = big;
    small.raw.resize(1000);
    double se_big = covariance_estimate(big, 0, 1).std_error;
    double se_small = covariance_estimate(small, 0, 1).std_error;
    CHECK(se_small / se_big > 1.5);
    CHECK(se_small / se_big < 2.7);
}

TEST_CASE("product moments and Wick predictions on Gaussian data") {
    MomentData d = gaussian_ensemble(4000, 100.0, 5);

    MomentEstimate p2 = estimate_product_moment(d, {0, 1});
    // Product moments use the 1/n normalization, the covariance 1/(n-1).
    double n = d.n_runs();
    CHECK(p2.estimate * n / (n - 1.0) ==
          doctest::Approx(covariance_estimate(d, 0, 1).value).epsilon(1e-10));
    CHECK_FALSE(p2.prediction.has_value());

    MomentEstimate p3 = estimate_product_moment(d, {0, 1, 2});
    REQUIRE(p3.prediction.has_value());
    CHECK(*p3.prediction == 0.0);
    CHECK(std::fabs(p3.z_score) < 4.0);

    MomentEstimate p4 = estimate_product_moment(d, {0, 0, 1, 2});
    REQUIRE(p4.prediction.has_value());
    // Wick sum of the three pairings, from the known covariance.
    double wick = kSigma[0][0] * kSigma[1][2] + 2.0 * kSigma[0][1] * kSigma[0][2];
    CHECK(*p4.prediction == doctest::Approx(wick).epsilon(0.15));
    CHECK(std::fabs(p4.z_score) < 4.0);
    CHECK(p4.deviation_std_error > 0.0);

    MomentData tiny = gaussian_ensemble(50, 100.0, 7);
    CHECK_THROWS_AS(estimate_product_moment(tiny, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_product_moment(d, {0}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_product_moment(d, {0, 1, 2, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_product_moment(d, {0, 9}), std::invalid_argument);
}

TEST_CASE("shape statistics vanish for Gaussian data") {
    MomentData d = gaussian_ensemble(4000, 100.0, 11);
    for (int s = 0; s < 3; ++s) {
        ShapeEstimate sh = estimate_shape(d, s);
        CHECK(sh.skewness_se > 0.0);
        CHECK(sh.kurtosis_se > 0.0);
        CHECK(std::fabs(sh.skewness) < 4.0 * sh.skewness_se);
        CHECK(std::fabs(sh.excess_kurtosis) < 4.0 * sh.kurtosis_se);
    }
}

TEST_CASE("shape statistics detect a skewed ensemble") {
    // Exponential fluctuations: skewness 2, excess kurtosis 6.
    MomentData d;
    d.mu_eps = 100.0;
    d.slot_ids = {"e"};
    d.slot_times = {0.0};
    auto rng = make_rng(13, {tag_fields});
    std::exponential_distribution<double> ex(1.0);
    d.raw.resize(5000);
    for (auto& row : d.raw) row = {ex(rng) / 10.0};
    ShapeEstimate sh = estimate_shape(d, 0);
    CHECK(sh.skewness == doctest::Approx(2.0).epsilon(0.15));
    CHECK(sh.excess_kurtosis == doctest::Approx(6.0).epsilon(0.35));
}

TEST_CASE("moments CSV layout") {
    MomentData d = gaussian_ensemble(200, 100.0, 17);
    std::vector<MomentEstimate> rows = {estimate_product_moment(d, {0, 1}),
                                        estimate_product_moment(d, {0, 1, 2}),
                                        estimate_product_moment(d, {0, 0, 1, 2})};
    std::stringstream ss;
    write_moments_csv(ss, d, rows);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "P,times,test_ids,estimate,std_error,wick_prediction,z_score");
    int nrows = 0;
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        ++nrows;
        CHECK(line.substr(0, 1) == std::to_string(2 + nrows - 1));
    }
    CHECK(nrows == 3);
}
