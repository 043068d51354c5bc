#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "fluctsim/ddouble.hpp"
#include "fluctsim/domain.hpp"
#include "fluctsim/hermite.hpp"
#include "fluctsim/rng.hpp"
#include "fluctsim/vec.hpp"

using namespace fluctsim;

namespace {

double dd_err(const DD& a, double ref) { return std::fabs(to_double(a) - ref); }

// Reference values for exactness checks, computed in 80-bit long double. A
// single double operation's rounding error is representable exactly there.
long double ld(const DD& a) { return (long double)a.hi + (long double)a.lo; }

}  // namespace

TEST_CASE("two_sum and two_prod are error-free transforms") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-30, 30);
    for (int t = 0; t < 2000; ++t) {
        double a = std::ldexp(u(rng), ex(rng));
        double b = std::ldexp(u(rng), ex(rng));
        DD s = ddops::two_sum(a, b);
        CHECK(s.hi == a + b);
        CHECK(ld(s) == (long double)a + (long double)b);
        DD p = ddops::two_prod(a, b);
        CHECK(p.hi == a * b);
        CHECK(ld(p) == (long double)a * (long double)b);
    }
}

TEST_CASE("double-double keeps terms a plain double would drop") {
    DD one(1.0);
    DD tiny(1e-17);
    // In double arithmetic (1 + 1e-17) - 1 collapses to zero.
    CHECK(1.0 + 1e-17 - 1.0 == 0.0);
    DD r = one + tiny - one;
    CHECK(to_double(r) == doctest::Approx(1e-17).epsilon(1e-12));

    // 2^-80 survives a round trip through +1.
    DD small(std::ldexp(1.0, -80));
    CHECK(to_double((one + small) - one) == std::ldexp(1.0, -80));
}

TEST_CASE("double-double field operations reach ~1e-30 accuracy") {
    // 1/3 * 3 == 1 far beyond double precision.
    DD third = DD(1.0) / DD(3.0);
    CHECK(dd_err(third * DD(3.0), 1.0) < 1e-30);

    // sqrt(2)^2 == 2.
    DD r2 = sqrt(DD(2.0));
    CHECK(dd_err(r2 * r2, 2.0) < 1e-30);

    // Random products against their exact quotient.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int t = 0; t < 500; ++t) {
        DD a(u(rng)), b(u(rng));
        DD q = (a * b) / b;
        CHECK(std::fabs(to_double(q - a)) < 1e-29 * std::fabs(to_double(a)));
        DD s = sqrt(a * a);
        CHECK(std::fabs(to_double(s - a)) < 1e-29 * std::fabs(to_double(a)));
    }
}

TEST_CASE("double-double comparisons and fabs") {
    DD a(1.0, 1e-20);
    DD b(1.0, 2e-20);
    CHECK(a < b);
    CHECK(b > a);
    CHECK(a <= a);
    CHECK(a == DD(1.0, 1e-20));
    CHECK(fabs(-a) == a);
    CHECK(fabs(DD(-3.0)) == DD(3.0));
    CHECK(to_double(-a) == -to_double(a));
}

TEST_CASE("double-double floor respects the low word") {
    CHECK(floor(DD(2.5)) == DD(2.0));
    CHECK(floor(DD(-0.5)) == DD(-1.0));
    // hi integral, lo negative: floor must step down.
    DD x(3.0, -1e-20);
    CHECK(floor(x) == DD(2.0));
    DD y(3.0, 1e-20);
    CHECK(floor(y) == DD(3.0));
}

TEST_CASE("wrap_unit lands in [0,1) for double and DD") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int t = 0; t < 2000; ++t) {
        double x = u(rng);
        double w = wrap_unit(x);
        CHECK(w >= 0.0);
        CHECK(w < 1.0);
        // Difference from x is an integer.
        CHECK(std::fabs((x - w) - std::round(x - w)) < 1e-12);
    }
    // Edge cases that stress the rounding guards.
    CHECK(wrap_unit(1.0) == 0.0);
    CHECK(wrap_unit(-0.0) == 0.0);
    CHECK(wrap_unit(std::nextafter(1.0, 0.0)) < 1.0);
    double just_below = wrap_unit(-1e-18);
    CHECK(just_below >= 0.0);
    CHECK(just_below < 1.0);

    DD wd = wrap_unit(DD(2.75));
    CHECK(to_double(wd) == doctest::Approx(0.75));
    DD wn = wrap_unit(DD(-0.25));
    CHECK(to_double(wn) == doctest::Approx(0.75));
}

TEST_CASE("torus_displacement is the minimum image in [-0.5, 0.5)") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d : {2, 3}) {
        for (int t = 0; t < 1000; ++t) {
            Vec a, b;
            for (int i = 0; i < d; ++i) {
                a[i] = u(rng);
                b[i] = u(rng);
            }
            Vec w = torus_displacement(a, b, d);
            for (int i = 0; i < d; ++i) {
                CHECK(w[i] >= -0.5);
                CHECK(w[i] < 0.5);
                // Congruent to a - b modulo 1.
                double diff = (a[i] - b[i]) - w[i];
                CHECK(std::fabs(diff - std::round(diff)) < 1e-12);
            }
            // Antisymmetry up to the half-open boundary convention.
            Vec wr = torus_displacement(b, a, d);
            for (int i = 0; i < d; ++i) {
                double s = w[i] + wr[i];
                CHECK(std::fabs(s - std::round(s)) < 1e-12);
            }
            CHECK(torus_distance(a, b, d) <= std::sqrt(0.25 * d) + 1e-12);
            CHECK(torus_distance(a, b, d) == doctest::Approx(torus_distance(b, a, d)));
        }
    }
    // Wrap-around shortcut: points near opposite faces are close.
    Vec p(0.01, 0.5), q(0.99, 0.5);
    CHECK(torus_distance(p, q, 2) == doctest::Approx(0.02));
}

TEST_CASE("Vec arithmetic runs over all three slots") {
    Vec a(1.0, 2.0, 3.0), b(4.0, -5.0, 6.0);
    CHECK(dot(a, b) == doctest::Approx(1.0 * 4.0 - 2.0 * 5.0 + 3.0 * 6.0));
    CHECK(norm2(a) == doctest::Approx(14.0));
    Vec c = a + 2.0 * b;
    CHECK(c[0] == doctest::Approx(9.0));
    CHECK(c[1] == doctest::Approx(-8.0));
    CHECK(c[2] == doctest::Approx(15.0));
    Vec d2(1.5, -2.5);
    CHECK(d2[2] == 0.0);  // third slot defaults to exactly zero
    CHECK((-a)[1] == -2.0);
}

TEST_CASE("seed derivation is deterministic and tag-sensitive") {
    CHECK(derive_seed(1, {tag_sampler, 0}) == derive_seed(1, {tag_sampler, 0}));
    CHECK(derive_seed(1, {tag_sampler, 0}) != derive_seed(1, {tag_sampler, 1}));
    CHECK(derive_seed(1, {tag_sampler, 0}) != derive_seed(1, {tag_dynamics, 0}));
    CHECK(derive_seed(1, {tag_sampler, 0}) != derive_seed(2, {tag_sampler, 0}));
    // Tag order matters; (a,b) and (b,a) are distinct streams.
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));

    // No collisions over a small grid of (base, run) pairs.
    std::set<std::uint64_t> seen;
    for (std::uint64_t base = 1; base <= 16; ++base)
        for (std::uint64_t run = 0; run < 64; ++run)
            seen.insert(derive_seed(base, {tag_sampler, run}));
    CHECK(seen.size() == 16u * 64u);
}

TEST_CASE("make_rng reproduces the same stream for the same tags") {
    auto r1 = make_rng(42, {tag_fields, 7});
    auto r2 = make_rng(42, {tag_fields, 7});
    for (int i = 0; i < 100; ++i) CHECK(r1() == r2());
    auto r3 = make_rng(42, {tag_fields, 8});
    bool all_equal = true;
    auto r4 = make_rng(42, {tag_fields, 7});
    for (int i = 0; i < 100; ++i) {
        (void)r4();
        if (r3() != r4()) all_equal = false;
    }
    CHECK_FALSE(all_equal);
}

TEST_CASE("normalized Hermite values match closed forms") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        double v = u(rng);
        CHECK(hermite_normalized(0, v) == 1.0);
        CHECK(hermite_normalized(1, v) == doctest::Approx(v));
        CHECK(hermite_normalized(2, v) == doctest::Approx((v * v - 1.0) / std::sqrt(2.0)));
        CHECK(hermite_normalized(3, v) ==
              doctest::Approx((v * v * v - 3.0 * v) / std::sqrt(6.0)));
        CHECK(hermite_normalized(4, v) ==
              doctest::Approx((v * v * v * v - 6.0 * v * v + 3.0) / std::sqrt(24.0)));
    }
}

TEST_CASE("hermite_normalized_all agrees with single evaluations") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    double table[kMaxHermiteDegree + 1];
    for (int t = 0; t < 50; ++t) {
        double v = u(rng);
        hermite_normalized_all(kMaxHermiteDegree, v, table);
        for (int n = 0; n <= kMaxHermiteDegree; ++n)
            CHECK(table[n] == doctest::Approx(hermite_normalized(n, v)).epsilon(1e-12));
    }
}

TEST_CASE("Hermite ladder identity v h_n = sqrt(n+1) h_{n+1} + sqrt(n) h_{n-1}") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 100; ++t) {
        double v = u(rng);
        for (int n = 1; n < 12; ++n) {
            double lhs = v * hermite_normalized(n, v);
            double rhs = std::sqrt(double(n + 1)) * hermite_normalized(n + 1, v) +
                         std::sqrt(double(n)) * hermite_normalized(n - 1, v);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}

TEST_CASE("Hermite orthonormality under the Gaussian by quadrature") {
    // 40-point Gauss-Legendre on [-10, 10] with the Gaussian weight folded in
    // integrates polynomial*Gaussian of this degree to near machine accuracy.
    // We use a fine trapezoid instead: the integrand decays like exp(-v^2/2),
    // so truncation at |v| = 10 and h = 1/512 is far below 1e-10.
    const double h = 1.0 / 512.0;
    auto inner = [&](int m, int n) {
        double s = 0.0;
        for (double v = -10.0; v <= 10.0; v += h) {
            double w = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
            s += hermite_normalized(m, v) * hermite_normalized(n, v) * w * h;
        }
        return s;
    };
    for (int m = 0; m <= 6; ++m)
        for (int n = 0; n <= 6; ++n)
            CHECK(inner(m, n) == doctest::Approx(m == n ? 1.0 : 0.0).epsilon(1e-8));
}

TEST_CASE("multi-index enumeration is graded and complete") {
    auto idx2 = hermite_multi_indices(2, 2);
    // Degrees 0,1,2 in d=2: 1 + 2 + 3 = 6 indices, graded by total degree.
    REQUIRE(idx2.size() == 6);
    CHECK(idx2[0] == MultiIndex{0, 0, 0});
    CHECK(idx2[1] == MultiIndex{1, 0, 0});
    CHECK(idx2[2] == MultiIndex{0, 1, 0});
    CHECK(idx2[3] == MultiIndex{2, 0, 0});
    CHECK(idx2[4] == MultiIndex{1, 1, 0});
    CHECK(idx2[5] == MultiIndex{0, 2, 0});
    for (std::size_t i = 1; i < idx2.size(); ++i)
        CHECK(multi_degree(idx2[i - 1]) <= multi_degree(idx2[i]));

    auto idx3 = hermite_multi_indices(3, 2);
    // d=3: 1 + 3 + 6 = 10.
    CHECK(idx3.size() == 10);
    std::set<std::array<int, 3>> uniq(idx3.begin(), idx3.end());
    CHECK(uniq.size() == idx3.size());
    for (const auto& a : idx3) CHECK(multi_degree(a) <= 2);

    double p = hermite_multi({2, 1, 0}, Vec(1.5, -0.5, 9.0), 2);
    CHECK(p == doctest::Approx(hermite_normalized(2, 1.5) * hermite_normalized(1, -0.5)));
}

TEST_CASE("domain parameter validation and scaling factor") {
    DomainParams d2(2, 0.01);
    CHECK(d2.mu_eps == doctest::Approx(100.0));
    DomainParams d3(3, 0.01);
    CHECK(d3.mu_eps == doctest::Approx(1e4));
    CHECK_THROWS_AS(DomainParams(4, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(DomainParams(2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(DomainParams(2, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(DomainParams(2, -1e-3), std::invalid_argument);
}
