#pragma once

#include <cmath>

namespace fluctsim {

// Double-double scalar: an unevaluated sum hi + lo with |lo| <= ulp(hi)/2,
// giving ~106 bits of mantissa. Used by the collision engine's time-reversal
// diagnostic, where per-event roundoff is amplified by the flow's instability
// and plain doubles are not enough (see README). Algorithms are the classic
// error-free transforms: Knuth two-sum and fma-based two-prod.
struct DD {
    double hi = 0.0;
    double lo = 0.0;

    DD() = default;
    DD(double x) : hi(x), lo(0.0) {}
    DD(double h, double l) : hi(h), lo(l) {}

    explicit operator double() const { return hi + lo; }
};

namespace ddops {

inline DD two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

// Requires |a| >= |b|.
inline DD quick_two_sum(double a, double b) {
    double s = a + b;
    return {s, b - (s - a)};
}

inline DD two_prod(double a, double b) {
    double p = a * b;
    return {p, std::fma(a, b, -p)};
}

}  // namespace ddops

inline DD operator+(const DD& a, const DD& b) {
    DD s = ddops::two_sum(a.hi, b.hi);
    double lo = s.lo + a.lo + b.lo;
    return ddops::quick_two_sum(s.hi, lo);
}

inline DD operator-(const DD& a) { return {-a.hi, -a.lo}; }
inline DD operator-(const DD& a, const DD& b) { return a + (-b); }

inline DD operator*(const DD& a, const DD& b) {
    DD p = ddops::two_prod(a.hi, b.hi);
    double lo = p.lo + a.hi * b.lo + a.lo * b.hi;
    return ddops::quick_two_sum(p.hi, lo);
}

inline DD operator/(const DD& a, const DD& b) {
    // One Newton correction on top of the double quotient.
    double q1 = a.hi / b.hi;
    DD r = a - DD(q1) * b;
    double q2 = (r.hi + r.lo) / b.hi;
    return ddops::quick_two_sum(q1, q2);
}

inline DD& operator+=(DD& a, const DD& b) { return a = a + b; }
inline DD& operator-=(DD& a, const DD& b) { return a = a - b; }
inline DD& operator*=(DD& a, const DD& b) { return a = a * b; }
inline DD& operator/=(DD& a, const DD& b) { return a = a / b; }

inline bool operator<(const DD& a, const DD& b) {
    return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
}
inline bool operator>(const DD& a, const DD& b) { return b < a; }
inline bool operator<=(const DD& a, const DD& b) { return !(b < a); }
inline bool operator>=(const DD& a, const DD& b) { return !(a < b); }
inline bool operator==(const DD& a, const DD& b) {
    return a.hi == b.hi && a.lo == b.lo;
}

inline DD sqrt(const DD& a) {
    // Karp's trick: y ~ 1/sqrt(a), then a*y refined by half a Newton step.
    if (a.hi == 0.0 && a.lo == 0.0) return {};
    double x = std::sqrt(a.hi);
    DD x2 = DD(x) * DD(x);
    DD err = a - x2;
    double corr = (err.hi + err.lo) / (2.0 * x);
    return ddops::quick_two_sum(x, corr);
}

inline DD fabs(const DD& a) { return a.hi < 0.0 || (a.hi == 0.0 && a.lo < 0.0) ? -a : a; }

inline DD floor(const DD& a) {
    double fh = std::floor(a.hi);
    if (fh != a.hi) return {fh, 0.0};
    // hi is integral; the fractional information lives in lo.
    return ddops::quick_two_sum(fh, std::floor(a.lo));
}

// Scalar shims so templated kinematics can write sc_sqrt(x) etc. for both
// double and DD.
inline double sc_sqrt(double x) { return std::sqrt(x); }
inline DD sc_sqrt(const DD& x) { return sqrt(x); }
inline double sc_floor(double x) { return std::floor(x); }
inline DD sc_floor(const DD& x) { return floor(x); }
inline double sc_abs(double x) { return std::fabs(x); }
inline DD sc_abs(const DD& x) { return fabs(x); }
inline double to_double(double x) { return x; }
inline double to_double(const DD& x) { return x.hi + x.lo; }

}  // namespace fluctsim
