#pragma once

#include <cstddef>

#include "pnpflow/distributions.hpp"
#include "pnpflow/fields.hpp"

namespace pnpflow {

enum class Coupling { independent, gaussian_ot };

namespace detail {

// Draw a coupled pair (x0, x1). GaussianOT applies the Monge map
// T(x0) = m + s x0 to the latent draw, which is the exact OT coupling for
// isotropic Gaussians.
inline void draw_pair(const LatentSpec& latent, const TargetSpec& target, Coupling coupling,
                      RngState& rng, Grid& x0, Grid& x1) {
    x0 = draw_latent(latent, rng);
    if (coupling == Coupling::independent) {
        x1 = draw_target(target, rng);
        return;
    }
    if (latent.kind != LatentSpec::Kind::isotropic_gaussian ||
        target.kind != TargetSpec::Kind::isotropic_gaussian) {
        throw validation_error(
            "gaussian_ot coupling requires isotropic Gaussian latent and target");
    }
    x1 = target.mean;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        x1[i] += target.scale * x0[i];
    }
}

}  // namespace detail

// Monte-Carlo estimate of E || D_t(Xt) - X1 ||^2 over coupled pairs.
inline double denoising_loss_mc(const VelocityField& field, const LatentSpec& latent,
                                const TargetSpec& target, Coupling coupling, double t,
                                std::size_t n_samples, RngState& rng) {
    if (n_samples == 0) throw domain_error("denoising_loss_mc: n_samples must be >= 1");
    Grid x0, x1;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        detail::draw_pair(latent, target, coupling, rng, x0, x1);
        const Grid xt = interp_et(x0, x1, t);
        const Grid d = denoise(field, t, xt);
        acc += squared_distance(d, x1);
    }
    return acc / static_cast<double>(n_samples);
}

// Monte-Carlo estimate of E_{x ~ Pt} || a(t,x) - b(t,x) ||^2, with Pt samples
// built by interpolating coupled pairs.
inline double fm_gap(const VelocityField& a, const VelocityField& b, const LatentSpec& latent,
                     const TargetSpec& target, Coupling coupling, double t,
                     std::size_t n_samples, RngState& rng) {
    if (a.dim() != b.dim()) {
        throw shape_error("fm_gap: field dimensions differ");
    }
    if (n_samples == 0) throw domain_error("fm_gap: n_samples must be >= 1");
    Grid x0, x1;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        detail::draw_pair(latent, target, coupling, rng, x0, x1);
        const Grid xt = interp_et(x0, x1, t);
        acc += squared_distance(a.eval(t, xt), b.eval(t, xt));
    }
    return acc / static_cast<double>(n_samples);
}

}  // namespace pnpflow
