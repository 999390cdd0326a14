#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pnpflow/quadrature.hpp"

namespace pnpflow {

struct Component1d {
    double weight;
    double mean;
    double scale;
};

namespace detail {

// log of the joint factor phi(x0) * pi_k N(x1(x0); mu_k, s_k^2) along the
// constraint line x1 = (x - (1-t) x0) / t. Exactly quadratic in x0.
inline double oracle_log_integrand(const Component1d& c, double t, double x, double x0) {
    const double log2pi = 1.8378770664093454835606594;
    const double x1 = (x - (1.0 - t) * x0) / t;
    const double r = x1 - c.mean;
    return std::log(c.weight) - 0.5 * log2pi - 0.5 * x0 * x0 -
           0.5 * log2pi - std::log(c.scale) - r * r / (2.0 * c.scale * c.scale);
}

}  // namespace detail

// Brute-force E[X1 | Xt = x] for X0 ~ N(0,1) and X1 a 1-D Gaussian mixture,
// by 256-node Gauss-Hermite over x0 with x1 = (x - (1-t) x0)/t. Each
// component's rule is recentred on the mode of its log-integrand (found by
// finite-difference Newton; the log-integrand is quadratic, so two steps land
// on it) and rescaled to the local curvature. With that affine change of
// variables the transformed integrand is constant times an affine factor, and
// the rule is exact to roundoff; a fixed rule centred at the origin loses all
// accuracy when s_k * t / (1-t) drops below the node spacing.
inline double cond_exp_oracle_1d(const std::vector<Component1d>& comps, double t, double x) {
    if (comps.empty()) throw domain_error("cond_exp_oracle_1d: empty mixture");
    if (!(t >= 0.0 && t <= 1.0)) throw domain_error("cond_exp_oracle_1d: t outside [0,1]");
    if (t == 0.0) {
        double m = 0.0;
        for (const auto& c : comps) m += c.weight * c.mean;
        return m;
    }

    const QuadRule& gh = gauss_hermite_256();
    const std::size_t K = comps.size();
    const double h = 1e-3;

    std::vector<double> mode(K), width(K), peak(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = comps[k];
        double b = 0.0;
        double curv = -1.0;
        for (int it = 0; it < 3; ++it) {
            const double lm = detail::oracle_log_integrand(c, t, x, b - h);
            const double l0 = detail::oracle_log_integrand(c, t, x, b);
            const double lp = detail::oracle_log_integrand(c, t, x, b + h);
            const double d1 = (lp - lm) / (2.0 * h);
            curv = (lp - 2.0 * l0 + lm) / (h * h);
            if (!(curv < 0.0)) curv = -1.0;
            b -= d1 / curv;
        }
        mode[k] = b;
        width[k] = 1.0 / std::sqrt(-curv);
        peak[k] = detail::oracle_log_integrand(c, t, x, b);
    }
    const double lmax = *std::max_element(peak.begin(), peak.end());

    double num = 0.0;
    double den = 0.0;
    const double sqrt2 = std::sqrt(2.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double jac = sqrt2 * width[k];
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            const double xi = gh.nodes[i];
            const double x0 = mode[k] + sqrt2 * width[k] * xi;
            const double lg = detail::oracle_log_integrand(comps[k], t, x, x0);
            const double contrib = std::exp(lg + xi * xi + std::log(gh.weights[i]) - lmax) * jac;
            const double x1 = (x - (1.0 - t) * x0) / t;
            den += contrib;
            num += contrib * x1;
        }
    }
    return num / den;
}

// Velocity oracle via v = (E[X1|Xt=x] - x)/(1-t); at t=1 the conditional
// expectation of X1 - X0 given X1 = x is x itself (latent mean zero).
inline double velocity_oracle_1d(const std::vector<Component1d>& comps, double t, double x) {
    if (t == 1.0) return x;
    return (cond_exp_oracle_1d(comps, t, x) - x) / (1.0 - t);
}

// Per-coordinate conditional variance Var(X1 - X0 | Xt) for the independent
// Gaussian pair, in unreduced form: (1+s^2) - (t s^2 - (1-t))^2 / a_t^2.
inline double cond_var_gauss_indep(double s, double t) {
    const double u = 1.0 - t;
    const double a2 = u * u + t * t * s * s;
    const double c = t * s * s - u;
    return (1.0 + s * s) - c * c / a2;
}

// CFM loss floor for the d-dimensional independent Gaussian task:
// E_t[ d * Var(X1-X0 | Xt) ] integrated by Gauss-Legendre.
inline double cfm_floor_gauss_indep(std::size_t d, double s, std::size_t n_nodes = 128) {
    return integrate01(
        [&](double t) { return static_cast<double>(d) * cond_var_gauss_indep(s, t); },
        n_nodes);
}

}  // namespace pnpflow
