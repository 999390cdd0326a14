#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pnpflow/grid.hpp"

namespace pnpflow {

// Evaluable velocity field v_t(x). Implementations must be deterministic,
// total on [0,1] x R^d, and shape-preserving.
class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual Grid eval(double t, const Grid& x) const = 0;
    virtual std::size_t dim() const = 0;
};

inline void check_field_args(double t, const Grid& x, std::size_t d, const char* who) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw domain_error(std::string(who) + ": t outside [0,1]");
    }
    if (x.size() != d) {
        throw shape_error(std::string(who) + ": input size " + std::to_string(x.size()) +
                          " != field dim " + std::to_string(d));
    }
}

// E[X1 - X0 | Xt = x] for X0 ~ N(0,I), X1 ~ N(m, s^2 I) independent:
// v = m + ((t s^2 - (1-t)) / a_t^2)(x - t m), a_t^2 = (1-t)^2 + t^2 s^2.
// a_1^2 = s^2 > 0, so t=1 evaluates directly.
class GaussIndepField : public VelocityField {
public:
    GaussIndepField(Grid mean, double s) : m_(std::move(mean)), s_(s) {
        if (!(s > 0.0)) throw domain_error("GaussIndepField: s must be positive");
    }

    Grid eval(double t, const Grid& x) const override {
        check_field_args(t, x, m_.size(), "GaussIndepField");
        const double u = 1.0 - t;
        const double a2 = u * u + t * t * s_ * s_;
        const double coef = (t * s_ * s_ - u) / a2;
        Grid v = x;
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = m_[i] + coef * (x[i] - t * m_[i]);
        }
        return v;
    }

    std::size_t dim() const override { return m_.size(); }

    const Grid& mean() const { return m_; }
    double s() const { return s_; }

private:
    Grid m_;
    double s_;
};

// Mixture version of the same conditional expectation. Responsibilities
// w_k ∝ pi_k N(x; t mu_k, a_{t,k}^2 I) are formed in log space; without the
// log-sum-exp shift the exponents underflow for distant components as t -> 1.
class GmmIndepField : public VelocityField {
public:
    struct Component {
        double weight;
        Grid mean;
        double scale;
    };

    explicit GmmIndepField(std::vector<Component> comps) : comps_(std::move(comps)) {
        if (comps_.empty()) throw domain_error("GmmIndepField: empty mixture");
        double wsum = 0.0;
        for (const auto& c : comps_) {
            if (!(c.scale > 0.0)) throw domain_error("GmmIndepField: scales must be positive");
            if (!c.mean.same_shape(comps_.front().mean)) {
                throw shape_error("GmmIndepField: mean shapes differ");
            }
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-12) {
            throw domain_error("GmmIndepField: weights must sum to 1");
        }
    }

    Grid eval(double t, const Grid& x) const override {
        check_field_args(t, x, dim(), "GmmIndepField");
        const double u = 1.0 - t;
        const std::size_t K = comps_.size();
        const std::size_t d = x.size();

        std::vector<double> logw(K);
        for (std::size_t k = 0; k < K; ++k) {
            const double s = comps_[k].scale;
            const double a2 = u * u + t * t * s * s;
            double q = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double r = x[i] - t * comps_[k].mean[i];
                q += r * r;
            }
            logw[k] = std::log(comps_[k].weight) -
                      0.5 * static_cast<double>(d) * std::log(a2) - q / (2.0 * a2);
        }
        double lmax = logw[0];
        for (double lw : logw) lmax = std::max(lmax, lw);
        double wsum = 0.0;
        for (double& lw : logw) {
            lw = std::exp(lw - lmax);
            wsum += lw;
        }

        Grid v(x.shape());
        for (std::size_t k = 0; k < K; ++k) {
            const double w = logw[k] / wsum;
            const double s = comps_[k].scale;
            const double a2 = u * u + t * t * s * s;
            const double coef = (t * s * s - u) / a2;
            for (std::size_t i = 0; i < d; ++i) {
                const double mu = comps_[k].mean[i];
                v[i] += w * (mu + coef * (x[i] - t * mu));
            }
        }
        return v;
    }

    std::size_t dim() const override { return comps_.front().mean.size(); }

    const std::vector<Component>& components() const { return comps_; }

private:
    std::vector<Component> comps_;
};

// Straight-line OT field for the Monge map T(x) = m + s x:
// v_t(x) = m + (s-1)(x - t m) / (1 + t(s-1)). Denominator positive on [0,1].
class GaussOtField : public VelocityField {
public:
    GaussOtField(Grid mean, double s) : m_(std::move(mean)), s_(s) {
        if (!(s > 0.0)) throw domain_error("GaussOtField: s must be positive");
    }

    Grid eval(double t, const Grid& x) const override {
        check_field_args(t, x, m_.size(), "GaussOtField");
        const double denom = 1.0 + t * (s_ - 1.0);
        Grid v = x;
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = m_[i] + (s_ - 1.0) * (x[i] - t * m_[i]) / denom;
        }
        return v;
    }

    std::size_t dim() const override { return m_.size(); }

    const Grid& mean() const { return m_; }
    double s() const { return s_; }

private:
    Grid m_;
    double s_;
};

class ZeroField : public VelocityField {
public:
    explicit ZeroField(std::size_t d) : d_(d) {}

    Grid eval(double t, const Grid& x) const override {
        check_field_args(t, x, d_, "ZeroField");
        return Grid(x.shape());
    }

    std::size_t dim() const override { return d_; }

private:
    std::size_t d_;
};

// Time-dependent denoiser D_t = Id + (1-t) v_t. D_1 = Id for every field.
inline Grid denoise(const VelocityField& field, double t, const Grid& x) {
    Grid v = field.eval(t, x);
    Grid out = x;
    const double u = 1.0 - t;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[i] + u * v[i];
    }
    return out;
}

// Explicit Euler from t=0 to t=1 with uniform steps. Exact on straight-line
// fields for any step count, since the field is constant along each path.
inline Grid euler_sample(const VelocityField& field, const Grid& x0, std::size_t n_steps) {
    if (n_steps == 0) throw domain_error("euler_sample: n_steps must be >= 1");
    Grid x = x0;
    const double dt = 1.0 / static_cast<double>(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        Grid v = field.eval(t, x);
        axpy(x, dt, v);
        if (!all_finite(x)) {
            throw numeric_error("euler_sample: non-finite state at step " + std::to_string(i));
        }
    }
    return x;
}

}  // namespace pnpflow
