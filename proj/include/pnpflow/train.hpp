#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pnpflow/adam.hpp"
#include "pnpflow/assignment.hpp"
#include "pnpflow/distributions.hpp"
#include "pnpflow/errors.hpp"
#include "pnpflow/mlp.hpp"
#include "pnpflow/rng.hpp"

namespace pnpflow {

enum class TrainCoupling { independent, minibatch_ot };

struct TrainConfig {
    std::size_t batch = 128;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;
    LatentSpec latent = LatentSpec::isotropic_gaussian(2);
    TargetSpec target = TargetSpec::isotropic_gaussian(Grid::vec({0.0, 0.0}), 1.0);
    TrainCoupling coupling = TrainCoupling::independent;
    AdamConfig adam;

    void validate() const {
        if (batch < 1) throw config_error("TrainConfig: batch must be >= 1");
        if (steps < 1) throw config_error("TrainConfig: steps must be >= 1");
        if (coupling == TrainCoupling::minibatch_ot && batch > 512) {
            throw config_error("TrainConfig: MinibatchOT requires B <= 512");
        }
        if (latent.dim != target.dim()) {
            throw config_error("TrainConfig: latent/target dimension mismatch");
        }
        adam.validate();
    }
};

struct TrainResult {
    MlpParams params;
    std::vector<double> loss_curve;  // one entry per step: pre-update batch loss
};

// CFM training loop. Each step owns a forked sub-stream keyed by its index, so
// loss curves are replayable and prefixes are stable under a change of total
// step count. The optional callback sees the parameters after each update.
inline TrainResult train_cfm(
    const TrainConfig& config, const MlpSpec& spec, RngState& rng,
    const std::function<void(std::size_t, const MlpParams&)>& checkpoint = {}) {
    config.validate();
    spec.validate();
    if (spec.input_dim != config.latent.dim) {
        throw config_error("train_cfm: spec.input_dim != latent dim");
    }

    RngState init_rng = rng.fork(0);
    MlpParams params = init_mlp_params(spec, init_rng);
    AdamState opt(config.adam, params.size());

    const std::size_t B = config.batch;
    const std::size_t d = spec.input_dim;
    std::vector<double> t_batch(B), x_flat(B * d), target_flat(B * d);
    std::vector<Grid> x0(B), x1(B);
    MlpCache cache;
    TrainResult result;
    result.loss_curve.reserve(config.steps);

    for (std::size_t step = 0; step < config.steps; ++step) {
        RngState srng = rng.fork(step + 1);
        for (std::size_t i = 0; i < B; ++i) x0[i] = draw_latent(config.latent, srng);
        for (std::size_t i = 0; i < B; ++i) x1[i] = draw_target(config.target, srng);
        if (config.coupling == TrainCoupling::minibatch_ot) {
            const OtPlan plan = minibatch_ot_assign(x0, x1);
            std::vector<Grid> paired(B);
            for (std::size_t i = 0; i < B; ++i) paired[i] = x1[plan.perm[i]];
            x1 = std::move(paired);
        }
        for (std::size_t i = 0; i < B; ++i) t_batch[i] = srng.next_uniform();
        for (std::size_t i = 0; i < B; ++i) {
            const double t = t_batch[i];
            for (std::size_t j = 0; j < d; ++j) {
                x_flat[i * d + j] = (1.0 - t) * x0[i][j] + t * x1[i][j];
                target_flat[i * d + j] = x1[i][j] - x0[i][j];
            }
        }

        mlp_forward_batch(params, t_batch, x_flat, cache);
        const double loss = mlp_batch_loss(cache, target_flat);
        if (!std::isfinite(loss) || loss > 1e6) {
            throw numeric_error("train_cfm: diverged at step " + std::to_string(step) +
                                " (loss " + std::to_string(loss) + ")");
        }
        result.loss_curve.push_back(loss);

        const std::vector<double> grads = mlp_param_grads(params, cache, target_flat);
        adam_step(opt, params.values, grads);
        if (checkpoint) checkpoint(step + 1, params);
    }

    params.require_finite("train_cfm");
    result.params = std::move(params);
    return result;
}

// ---- parameter file ----
//
//   PNPFLOW-MLP 1
//   dim <d>
//   widths <w0> <w1> ...
//   data <count>
//   <count raw little-endian 64-bit doubles, layer-major W0 b0 W1 b1 ...>

static_assert(std::endian::native == std::endian::little,
              "parameter files assume a little-endian host");

inline void save_mlp_params(const std::string& path, const MlpParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_mlp_params: cannot open " + path);
    out << "PNPFLOW-MLP 1\n";
    out << "dim " << params.spec.input_dim << "\n";
    out << "widths";
    for (std::size_t w : params.spec.widths) out << " " << w;
    out << "\n";
    out << "data " << params.values.size() << "\n";
    out.write(reinterpret_cast<const char*>(params.values.data()),
              static_cast<std::streamsize>(params.values.size() * sizeof(double)));
    if (!out) throw io_error("save_mlp_params: write failed for " + path);
}

inline MlpParams load_mlp_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_mlp_params: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "PNPFLOW-MLP 1") {
        throw io_error("load_mlp_params: bad magic in " + path);
    }
    MlpSpec spec;
    spec.widths.clear();
    if (!std::getline(in, line)) throw io_error("load_mlp_params: truncated header");
    {
        std::istringstream is(line);
        std::string tag;
        if (!(is >> tag >> spec.input_dim) || tag != "dim") {
            throw io_error("load_mlp_params: bad dim line");
        }
    }
    if (!std::getline(in, line)) throw io_error("load_mlp_params: truncated header");
    {
        std::istringstream is(line);
        std::string tag;
        if (!(is >> tag) || tag != "widths") throw io_error("load_mlp_params: bad widths line");
        std::size_t w;
        while (is >> w) spec.widths.push_back(w);
    }
    std::size_t count = 0;
    if (!std::getline(in, line)) throw io_error("load_mlp_params: truncated header");
    {
        std::istringstream is(line);
        std::string tag;
        if (!(is >> tag >> count) || tag != "data") throw io_error("load_mlp_params: bad data line");
    }
    spec.validate();
    MlpParams params(spec);
    if (params.values.size() != count) {
        throw io_error("load_mlp_params: data count " + std::to_string(count) +
                       " does not match spec (" + std::to_string(params.values.size()) + ")");
    }
    in.read(reinterpret_cast<char*>(params.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double)) {
        throw io_error("load_mlp_params: truncated payload in " + path);
    }
    params.require_finite("load_mlp_params");
    return params;
}

}  // namespace pnpflow
