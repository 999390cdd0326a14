#pragma once

#include <cmath>
#include <utility>

#include "pnpflow/errors.hpp"
#include "pnpflow/grid.hpp"
#include "pnpflow/operators.hpp"
#include "pnpflow/rng.hpp"

namespace pnpflow {

struct NoiseModel {
    enum class Kind { gaussian, laplace };

    Kind kind = Kind::gaussian;
    double sigma = 0.0;  // gaussian
    double b = 1.0;      // laplace

    static NoiseModel gaussian(double sigma) {
        if (!(sigma >= 0.0)) throw domain_error("NoiseModel: sigma must be >= 0");
        NoiseModel n;
        n.kind = Kind::gaussian;
        n.sigma = sigma;
        return n;
    }

    static NoiseModel laplace(double b) {
        if (!(b > 0.0)) throw domain_error("NoiseModel: b must be positive");
        NoiseModel n;
        n.kind = Kind::laplace;
        n.b = b;
        return n;
    }
};

// y = Hx + xi with i.i.d. noise per observation coordinate.
inline Grid degrade(const Grid& x, const DegradationOp& H, const NoiseModel& noise,
                    RngState& rng) {
    Grid y = H.apply(x);
    if (noise.kind == NoiseModel::Kind::gaussian) {
        if (noise.sigma > 0.0) {
            for (double& v : y) v += noise.sigma * rng.next_normal();
        }
    } else {
        for (double& v : y) v += rng.next_laplace(noise.b);
    }
    return y;
}

// Data-fidelity term F. GaussianL2 defaults to the unweighted 1/2 ||Hx-y||^2;
// the 1/sigma^2 weight sits behind sigma_weighted.
struct Fidelity {
    enum class Kind { gaussian_l2, laplace_l1 };

    Kind kind = Kind::gaussian_l2;
    bool sigma_weighted = false;
    double sigma = 1.0;
    DegradationOp op = DegradationOp::identity({1});
    Grid y;

    static Fidelity gaussian(DegradationOp H, Grid y) {
        Fidelity f;
        f.kind = Kind::gaussian_l2;
        f.op = std::move(H);
        f.y = std::move(y);
        f.check();
        return f;
    }

    static Fidelity gaussian_weighted(DegradationOp H, Grid y, double sigma) {
        if (!(sigma > 0.0)) throw domain_error("Fidelity: sigma-weighted mode needs sigma > 0");
        Fidelity f;
        f.kind = Kind::gaussian_l2;
        f.sigma_weighted = true;
        f.sigma = sigma;
        f.op = std::move(H);
        f.y = std::move(y);
        f.check();
        return f;
    }

    static Fidelity laplace(DegradationOp H, Grid y) {
        Fidelity f;
        f.kind = Kind::laplace_l1;
        f.op = std::move(H);
        f.y = std::move(y);
        f.check();
        return f;
    }

    void check() const {
        if (y.shape() != op.output_shape()) {
            throw shape_error("Fidelity: y shape does not match the operator output");
        }
    }
};

inline double datafit_value(const Fidelity& fid, const Grid& x) {
    const Grid r = sub(fid.op.apply(x), fid.y);
    if (fid.kind == Fidelity::Kind::laplace_l1) {
        double s = 0.0;
        for (double v : r) s += std::abs(v);
        return s;
    }
    const double w = fid.sigma_weighted ? 1.0 / (fid.sigma * fid.sigma) : 1.0;
    return 0.5 * w * squared_norm(r);
}

// Gaussian: H^T(Hx - y), optionally scaled by 1/sigma^2.
// Laplace: H^T sign(Hx - y) with sign(0) = 0.
inline Grid datafit_grad(const Fidelity& fid, const Grid& x) {
    Grid r = sub(fid.op.apply(x), fid.y);
    if (fid.kind == Fidelity::Kind::laplace_l1) {
        for (double& v : r) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        return fid.op.adjoint(r);
    }
    if (fid.sigma_weighted) {
        const double w = 1.0 / (fid.sigma * fid.sigma);
        for (double& v : r) v *= w;
    }
    return fid.op.adjoint(r);
}

// Exact posterior mean for H = Identity, N(m, s^2 I) prior, N(0, sigma^2 I)
// noise; the conjugate case where MAP and posterior mean coincide.
inline Grid map_oracle_gaussian_denoise(const Grid& y, const Grid& m, double s, double sigma) {
    if (!(s > 0.0)) throw domain_error("map_oracle_gaussian_denoise: s must be positive");
    if (!(sigma > 0.0)) throw domain_error("map_oracle_gaussian_denoise: sigma must be positive");
    require_same_shape(y, m, "map_oracle_gaussian_denoise");
    const double s2 = s * s, n2 = sigma * sigma;
    Grid out = y;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (s2 * y[i] + n2 * m[i]) / (s2 + n2);
    }
    return out;
}

}  // namespace pnpflow
