#include "fluctsim/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace fluctsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

GalerkinBasis::GalerkinBasis(int dim, int fourier_cutoff, int hermite_cutoff)
    : dim_(dim), fourier_K_(fourier_cutoff), hermite_A_(hermite_cutoff) {
    if (dim != 2 && dim != 3)
        throw std::invalid_argument("GalerkinBasis: dim must be 2 or 3");
    if (fourier_cutoff < 0 || hermite_cutoff < 0)
        throw std::invalid_argument("GalerkinBasis: cutoffs must be nonnegative");
    if (hermite_cutoff > kMaxHermiteDegree)
        throw std::invalid_argument("GalerkinBasis: Hermite cutoff exceeds supported degree " +
                                    std::to_string(kMaxHermiteDegree));

    xmodes_.push_back(XMode{{0, 0, 0}, trig_const});
    // Lattice vectors in lexicographic order; each positive representative
    // contributes a cos mode and then its sin partner.
    std::array<int, 3> k{0, 0, 0};
    int K = fourier_K_;
    for (int k0 = -K; k0 <= K; ++k0)
        for (int k1 = -K; k1 <= K; ++k1)
            for (int k2 = -(dim_ > 2 ? K : 0); k2 <= (dim_ > 2 ? K : 0); ++k2) {
                k = {k0, k1, k2};
                if (!lex_positive(k)) continue;
                xmodes_.push_back(XMode{k, trig_cos});
                xmodes_.push_back(XMode{k, trig_sin});
            }

    hindices_ = hermite_multi_indices(dim_, hermite_A_);
}

int GalerkinBasis::hermite_position(const MultiIndex& alpha) const {
    for (int i = 0; i < int(hindices_.size()); ++i)
        if (hindices_[i] == alpha) return i;
    return -1;
}

TestFunction GalerkinBasis::element(int idx) const {
    const XMode& xm = xmodes_[xmode_of(idx)];
    FourierHermite fh;
    fh.alpha = hindices_[hermite_of(idx)];
    if (xm.trig == trig_cos)
        fh.k = xm.k;
    else if (xm.trig == trig_sin)
        fh.k = {-xm.k[0], -xm.k[1], -xm.k[2]};
    return TestFunction{fh};
}

std::string GalerkinBasis::label(int idx) const { return element(idx).id(); }

double GalerkinBasis::eval(int idx, const Vec& x, const Vec& v) const {
    const XMode& xm = xmodes_[xmode_of(idx)];
    double xf = 1.0;
    if (xm.trig != trig_const) {
        double phase = 0.0;
        for (int j = 0; j < dim_; ++j) phase += xm.k[j] * x[j];
        phase *= kTwoPi;
        xf = std::sqrt(2.0) * (xm.trig == trig_cos ? std::cos(phase) : std::sin(phase));
    }
    return xf * hermite_multi(hindices_[hermite_of(idx)], v, dim_);
}

void GalerkinBasis::eval_hermite_all(const Vec& v, double* out) const {
    // Per-component value tables up to degree A, then graded products.
    double table[3][kMaxHermiteDegree + 1];
    for (int j = 0; j < dim_; ++j) hermite_normalized_all(hermite_A_, v[j], table[j]);
    for (int i = 0; i < int(hindices_.size()); ++i) {
        const MultiIndex& a = hindices_[i];
        double prod = 1.0;
        for (int j = 0; j < dim_; ++j) prod *= table[j][a[j]];
        out[i] = prod;
    }
}

void GalerkinBasis::eval_all(const Vec& x, const Vec& v, double* out) const {
    int nh = n_hermite();
    std::vector<double> hv(nh);
    eval_hermite_all(v, hv.data());
    for (int ix = 0; ix < n_xmodes(); ++ix) {
        const XMode& xm = xmodes_[ix];
        double xf = 1.0;
        if (xm.trig != trig_const) {
            double phase = 0.0;
            for (int j = 0; j < dim_; ++j) phase += xm.k[j] * x[j];
            phase *= kTwoPi;
            xf = std::sqrt(2.0) * (xm.trig == trig_cos ? std::cos(phase) : std::sin(phase));
        }
        for (int ih = 0; ih < nh; ++ih) out[ix * nh + ih] = xf * hv[ih];
    }
}

std::vector<int> GalerkinBasis::x_only_indices() const {
    std::vector<int> out;
    for (int ix = 0; ix < n_xmodes(); ++ix) out.push_back(flat_index(ix, 0));
    return out;
}

std::vector<std::vector<double>> GalerkinBasis::invariant_directions() const {
    std::vector<std::vector<double>> dirs;
    auto unit = [&](int ih) {
        std::vector<double> c(size(), 0.0);
        c[flat_index(0, ih)] = 1.0;
        return c;
    };
    dirs.push_back(unit(0));  // mass
    if (hermite_A_ >= 1) {
        for (int j = 0; j < dim_; ++j) {
            MultiIndex e{0, 0, 0};
            e[j] = 1;
            dirs.push_back(unit(hermite_position(e)));
        }
    }
    if (hermite_A_ >= 2) {
        // |v|^2 with the mass component projected out: sum_j h2(v_j)/sqrt(d).
        std::vector<double> c(size(), 0.0);
        for (int j = 0; j < dim_; ++j) {
            MultiIndex e{0, 0, 0};
            e[j] = 2;
            c[flat_index(0, hermite_position(e))] = 1.0 / std::sqrt(double(dim_));
        }
        dirs.push_back(c);
    }
    return dirs;
}

std::vector<double> GalerkinBasis::coefficients(const TestFunction& tf) const {
    std::vector<double> c(size(), 0.0);
    auto place = [&](const FourierHermite& fh, double w) {
        int ih = hermite_position(fh.alpha);
        if (ih < 0)
            throw std::invalid_argument("GalerkinBasis: Hermite degree of " + tf.id() +
                                        " exceeds cutoff A=" + std::to_string(hermite_A_));
        int ix = -1;
        if (is_zero(fh.k)) {
            ix = 0;
        } else {
            std::array<int, 3> pos = fh.k;
            Trig trig = trig_cos;
            if (!lex_positive(pos)) {
                pos = {-pos[0], -pos[1], -pos[2]};
                trig = trig_sin;
            }
            for (int i = 1; i < n_xmodes(); ++i)
                if (xmodes_[i].k == pos && xmodes_[i].trig == trig) {
                    ix = i;
                    break;
                }
        }
        if (ix < 0)
            throw std::invalid_argument("GalerkinBasis: wavevector of " + tf.id() +
                                        " exceeds cutoff K=" + std::to_string(fourier_K_));
        c[flat_index(ix, ih)] += w;
    };

    if (const auto* fh = std::get_if<FourierHermite>(&tf.node)) {
        place(*fh, 1.0);
    } else if (const auto* ci = std::get_if<CollisionInvariant>(&tf.node)) {
        for (const auto& [fh, w] : invariant_coefficients(*ci, dim_)) place(fh, w);
    } else {
        throw std::invalid_argument("GalerkinBasis: custom functions have no expansion");
    }
    return c;
}

}  // namespace fluctsim
