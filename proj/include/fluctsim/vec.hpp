#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace fluctsim {

// Coordinate triple with fixed capacity 3. Components at index >= dim are kept
// at exactly zero by every producer, so dot products, norms and differences can
// run over all three slots unconditionally and stay correct for d = 2 and 3.
template <class R>
struct VecT {
    std::array<R, 3> c{R(0), R(0), R(0)};

    VecT() = default;
    VecT(R a, R b, R z = R(0)) : c{a, b, z} {}

    R& operator[](std::size_t i) { return c[i]; }
    const R& operator[](std::size_t i) const { return c[i]; }

    VecT& operator+=(const VecT& o) {
        for (int i = 0; i < 3; ++i) c[i] += o.c[i];
        return *this;
    }
    VecT& operator-=(const VecT& o) {
        for (int i = 0; i < 3; ++i) c[i] -= o.c[i];
        return *this;
    }
    VecT& operator*=(R s) {
        for (int i = 0; i < 3; ++i) c[i] *= s;
        return *this;
    }

    friend VecT operator+(VecT a, const VecT& b) { return a += b; }
    friend VecT operator-(VecT a, const VecT& b) { return a -= b; }
    friend VecT operator*(VecT a, R s) { return a *= s; }
    friend VecT operator*(R s, VecT a) { return a *= s; }
    friend VecT operator-(VecT a) {
        for (int i = 0; i < 3; ++i) a.c[i] = -a.c[i];
        return a;
    }

    friend R dot(const VecT& a, const VecT& b) {
        return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
    }
    friend R norm2(const VecT& a) { return dot(a, a); }

    friend bool operator==(const VecT& a, const VecT& b) { return a.c == b.c; }
};

using Vec = VecT<double>;

}  // namespace fluctsim
