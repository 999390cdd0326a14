#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pnpflow/errors.hpp"

namespace pnpflow {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0.0)) throw config_error("AdamConfig: lr must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw config_error("AdamConfig: beta1 outside [0,1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw config_error("AdamConfig: beta2 outside [0,1)");
        if (!(eps > 0.0)) throw config_error("AdamConfig: eps must be positive");
    }
};

// Bias-corrected Adam over one flat parameter vector.
struct AdamState {
    AdamConfig hyper;
    std::vector<double> m, v;
    std::uint64_t step = 0;

    AdamState(AdamConfig cfg, std::size_t n_params)
        : hyper(cfg), m(n_params, 0.0), v(n_params, 0.0) {
        hyper.validate();
    }
};

inline void adam_step(AdamState& state, std::vector<double>& params,
                      const std::vector<double>& grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size()) {
        throw shape_error("adam_step: size mismatch");
    }
    ++state.step;
    const AdamConfig& h = state.hyper;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * grads[i];
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        const double upd = h.lr * mhat / (std::sqrt(vhat) + h.eps);
        if (!std::isfinite(upd)) {
            throw numeric_error("adam_step: non-finite update at index " + std::to_string(i));
        }
        params[i] -= upd;
    }
}

}  // namespace pnpflow
