#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pnpflow/errors.hpp"

namespace pnpflow {

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// Orthonormal Hermite value at x (physicists' weight e^{-x^2}). Normalized
// recurrence keeps values O(1) inside the oscillatory region, so n=256 is
// evaluable without overflow.
inline double hermite_normalized(std::size_t n, double x, double* prev_out = nullptr) {
    const double h0 = 0.7511255444649424828587030;  // pi^{-1/4}
    if (n == 0) {
        if (prev_out) *prev_out = 0.0;
        return h0;
    }
    double hprev = h0;
    double hcur = std::sqrt(2.0) * x * h0;
    for (std::size_t k = 1; k < n; ++k) {
        const double next = x * std::sqrt(2.0 / (k + 1.0)) * hcur -
                            std::sqrt(k / (k + 1.0)) * hprev;
        hprev = hcur;
        hcur = next;
    }
    if (prev_out) *prev_out = hprev;  // h_{n-1}, used by Newton via h'_n
    return hcur;
}

}  // namespace detail

// Gauss-Hermite rule for \int e^{-x^2} f(x) dx. Roots located by a sign-change
// scan of the normalized polynomial over [0, sqrt(2n+1)], polished by Newton
// with h'_n = sqrt(2n) h_{n-1}; weights via the orthonormal-sum identity
// w_i = 1 / sum_{k<n} h_k(x_i)^2.
inline QuadRule gauss_hermite(std::size_t n) {
    if (n == 0) throw domain_error("gauss_hermite: n must be >= 1");
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);

    const double upper = std::sqrt(2.0 * n + 1.0);
    const std::size_t scan = 2000 * n;
    std::vector<double> positive;

    double xa = (n % 2 == 0) ? 1e-12 : 1e-9;  // odd n has a root at 0, handled below
    double fa = detail::hermite_normalized(n, xa);
    for (std::size_t i = 1; i <= scan; ++i) {
        const double xb = upper * static_cast<double>(i) / static_cast<double>(scan);
        const double fb = detail::hermite_normalized(n, xb);
        if ((fa < 0.0) != (fb < 0.0)) {
            double r = 0.5 * (xa + xb);
            for (int it = 0; it < 60; ++it) {
                double prev = 0.0;
                const double f = detail::hermite_normalized(n, r, &prev);
                const double df = std::sqrt(2.0 * n) * prev;
                const double step = f / df;
                r -= step;
                if (std::abs(step) < 1e-15 * (1.0 + std::abs(r))) break;
            }
            positive.push_back(r);
        }
        xa = xb;
        fa = fb;
    }

    const std::size_t half = n / 2;
    if (positive.size() != half) {
        throw numeric_error("gauss_hermite: root scan found " +
                            std::to_string(positive.size()) + " roots, expected " +
                            std::to_string(half));
    }

    if (n % 2 == 1) rule.nodes[half] = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        rule.nodes[n - 1 - i] = positive[half - 1 - i];
        rule.nodes[i] = -positive[half - 1 - i];
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double x = rule.nodes[i];
        // sum of squared orthonormal values h_0..h_{n-1}
        double hkm1 = 0.0;
        double hk = 0.7511255444649424828587030;  // pi^{-1/4}
        double acc = hk * hk;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double next = x * std::sqrt(2.0 / (k + 1.0)) * hk -
                                std::sqrt(static_cast<double>(k) / (k + 1.0)) * hkm1;
            hkm1 = hk;
            hk = next;
            acc += hk * hk;
        }
        rule.weights[i] = 1.0 / acc;
    }
    return rule;
}

// Cached 256-node rule used by the conditional-expectation oracle.
inline const QuadRule& gauss_hermite_256() {
    static const QuadRule rule = gauss_hermite(256);
    return rule;
}

// Gauss-Legendre rule on [-1,1].
inline QuadRule gauss_legendre(std::size_t n) {
    if (n == 0) throw domain_error("gauss_legendre: n must be >= 1");
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pn = 0.0, pnm1 = 0.0;
        for (int it = 0; it < 100; ++it) {
            pnm1 = 1.0;
            pn = x;
            for (std::size_t k = 1; k < n; ++k) {
                const double next = ((2.0 * k + 1.0) * x * pn - k * pnm1) / (k + 1.0);
                pnm1 = pn;
                pn = next;
            }
            const double dpn = n * (x * pn - pnm1) / (x * x - 1.0);
            const double step = pn / dpn;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        pnm1 = 1.0;
        pn = x;
        for (std::size_t k = 1; k < n; ++k) {
            const double next = ((2.0 * k + 1.0) * x * pn - k * pnm1) / (k + 1.0);
            pnm1 = pn;
            pn = next;
        }
        const double dpn = n * (x * pn - pnm1) / (x * x - 1.0);
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dpn * dpn);
    }
    return rule;
}

// \int_0^1 f(t) dt with an n-node Gauss-Legendre rule.
template <typename F>
double integrate01(F&& f, std::size_t n = 128) {
    const QuadRule rule = gauss_legendre(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 0.5 * (rule.nodes[i] + 1.0);
        acc += 0.5 * rule.weights[i] * f(t);
    }
    return acc;
}

}  // namespace pnpflow
