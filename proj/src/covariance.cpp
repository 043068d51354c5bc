#include "fluctsim/covariance.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace fluctsim {

namespace {

void check_args(const GeneratorMatrix& gen, const std::vector<double>& g,
                const std::vector<double>& h, const std::vector<double>& t_grid) {
    if (int(g.size()) != gen.B.rows() || int(h.size()) != gen.B.rows())
        throw std::invalid_argument("propagate_covariance: coefficient size does not match basis");
    double prev = -1.0;
    for (double t : t_grid) {
        if (!(t >= 0.0) || !(t > prev))
            throw std::invalid_argument(
                "propagate_covariance: t_grid must be nonnegative and strictly increasing");
        prev = t;
    }
}

}  // namespace

CovarianceCurve propagate_covariance(const GeneratorMatrix& gen, const std::vector<double>& g,
                                     const std::vector<double>& h,
                                     const std::vector<double>& t_grid) {
    check_args(gen, g, h, t_grid);
    Eigen::Map<const Eigen::VectorXd> gv(g.data(), g.size());
    Eigen::Map<const Eigen::VectorXd> hv(h.data(), h.size());
    CovarianceCurve out;
    for (double t : t_grid) {
        out.t.push_back(t);
        if (t == 0.0) {
            out.value.push_back(hv.dot(gv));
        } else {
            Eigen::MatrixXd e = (t * gen.B).exp();
            out.value.push_back(hv.dot(e * gv));
        }
    }
    return out;
}

CovarianceCurve propagate_covariance_rk4(const GeneratorMatrix& gen, const std::vector<double>& g,
                                         const std::vector<double>& h,
                                         const std::vector<double>& t_grid, double dt_max) {
    check_args(gen, g, h, t_grid);
    if (!(dt_max > 0)) throw std::invalid_argument("propagate_covariance_rk4: dt_max must be > 0");
    Eigen::Map<const Eigen::VectorXd> hv(h.data(), h.size());
    Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    const Eigen::MatrixXd& B = gen.B;

    CovarianceCurve out;
    double t_now = 0.0;
    for (double t : t_grid) {
        double span = t - t_now;
        if (span > 0) {
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double dt = span / steps;
            for (int s = 0; s < steps; ++s) {
                Eigen::VectorXd k1 = B * u;
                Eigen::VectorXd k2 = B * (u + 0.5 * dt * k1);
                Eigen::VectorXd k3 = B * (u + 0.5 * dt * k2);
                Eigen::VectorXd k4 = B * (u + dt * k3);
                u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t_now = t;
        }
        out.t.push_back(t);
        out.value.push_back(hv.dot(u));
    }
    return out;
}

void write_curve_csv(std::ostream& os, const CovarianceCurve& curve) {
    os << "t,value\n";
    char buf[96];
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", curve.t[i], curve.value[i]);
        os << buf;
    }
}

}  // namespace fluctsim
