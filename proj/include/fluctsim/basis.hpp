#pragma once

#include <array>
#include <string>
#include <vector>

#include "fluctsim/hermite.hpp"
#include "fluctsim/test_function.hpp"
#include "fluctsim/vec.hpp"

namespace fluctsim {

// Orthonormal Fourier x Hermite basis on the unit torus with the Maxwellian
// velocity weight. Spatial modes: the constant, then a cos and a sin mode for
// every lexicographically positive lattice vector with |k|_inf <= K. Velocity
// modes: products of normalized probabilists' Hermite polynomials with total
// degree <= A, graded. Element (ix, ih) lives at flat index ix * n_hermite()
// + ih; the whole family has a closed-form identity Gram matrix.
class GalerkinBasis {
  public:
    enum Trig { trig_const = 0, trig_cos = 1, trig_sin = 2 };
    struct XMode {
        std::array<int, 3> k{0, 0, 0};
        Trig trig = trig_const;
    };

    GalerkinBasis(int dim, int fourier_cutoff, int hermite_cutoff);

    int dim() const { return dim_; }
    int fourier_cutoff() const { return fourier_K_; }
    int hermite_cutoff() const { return hermite_A_; }
    int n_xmodes() const { return int(xmodes_.size()); }
    int n_hermite() const { return int(hindices_.size()); }
    int size() const { return n_xmodes() * n_hermite(); }

    int flat_index(int ix, int ih) const { return ix * n_hermite() + ih; }
    int xmode_of(int idx) const { return idx / n_hermite(); }
    int hermite_of(int idx) const { return idx % n_hermite(); }

    const std::vector<XMode>& xmodes() const { return xmodes_; }
    const std::vector<MultiIndex>& hermite_indices() const { return hindices_; }

    // Position of a Hermite multi-index in the graded list, -1 if absent.
    int hermite_position(const MultiIndex& alpha) const;

    // The element as a declarative test function; cos modes carry the
    // lexicographically positive wavevector, sin modes its negation.
    TestFunction element(int idx) const;
    std::string label(int idx) const;

    double eval(int idx, const Vec& x, const Vec& v) const;
    // Fills out[0 .. size()) with every element value at (x, v).
    void eval_all(const Vec& x, const Vec& v, double* out) const;
    // Fills out[0 .. n_hermite()) with the velocity factors alone.
    void eval_hermite_all(const Vec& v, double* out) const;

    // Indices whose velocity factor is the constant polynomial.
    std::vector<int> x_only_indices() const;

    // Orthonormal coefficient vectors spanning the collision invariants
    // (mass, momentum components, centered energy) on the zero x-mode.
    // Requires A >= 1 for momentum and A >= 2 for the energy direction;
    // missing directions are simply omitted.
    std::vector<std::vector<double>> invariant_directions() const;

    // Expansion coefficients of a test function in this basis. Throws when
    // the function falls outside the span (cutoff exceeded, custom node).
    std::vector<double> coefficients(const TestFunction& tf) const;

  private:
    int dim_;
    int fourier_K_;
    int hermite_A_;
    std::vector<XMode> xmodes_;
    std::vector<MultiIndex> hindices_;
};

}  // namespace fluctsim
