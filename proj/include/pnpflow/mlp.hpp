#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pnpflow/errors.hpp"
#include "pnpflow/fields.hpp"
#include "pnpflow/grid.hpp"
#include "pnpflow/rng.hpp"

namespace pnpflow {

// v(t,x) for x in R^d; the network input is concat(x, t, sin 2pi t, cos 2pi t),
// so layer 0 has d+3 inputs and the last layer emits d outputs.
struct MlpSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> widths{256, 256};

    void validate() const {
        if (input_dim < 1) throw config_error("MlpSpec: input_dim must be >= 1");
        if (widths.empty()) throw config_error("MlpSpec: at least one hidden layer");
        for (std::size_t w : widths) {
            if (w < 1) throw config_error("MlpSpec: zero-width hidden layer");
        }
    }

    std::size_t feature_dim() const { return input_dim + 3; }

    // [in, hidden..., out]; layer l maps layer_dims[l] -> layer_dims[l+1].
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.push_back(feature_dim());
        dims.insert(dims.end(), widths.begin(), widths.end());
        dims.push_back(input_dim);
        return dims;
    }

    std::size_t layer_count() const { return widths.size() + 1; }

    bool operator==(const MlpSpec& other) const {
        return input_dim == other.input_dim && widths == other.widths;
    }
};

inline double silu(double u) { return u / (1.0 + std::exp(-u)); }

inline double dsilu(double u) {
    const double s = 1.0 / (1.0 + std::exp(-u));
    return s * (1.0 + u * (1.0 - s));
}

// All weights and biases in one flat vector, layer-major (W0, b0, W1, b1, ...),
// each W row-major (out x in). Flat storage keeps the optimizer, the
// serializer, and the finite-difference probes trivial.
struct MlpParams {
    struct LayerView {
        std::size_t w_off, rows, cols, b_off;
    };

    MlpSpec spec;
    std::vector<LayerView> layers;
    std::vector<double> values;

    MlpParams() = default;

    explicit MlpParams(const MlpSpec& s) : spec(s) {
        spec.validate();
        const auto dims = spec.layer_dims();
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            LayerView v{off, dims[l + 1], dims[l], 0};
            off += v.rows * v.cols;
            v.b_off = off;
            off += v.rows;
            layers.push_back(v);
        }
        values.assign(off, 0.0);
    }

    std::size_t size() const { return values.size(); }

    const double* weight(std::size_t l) const { return values.data() + layers[l].w_off; }
    double* weight(std::size_t l) { return values.data() + layers[l].w_off; }
    const double* bias(std::size_t l) const { return values.data() + layers[l].b_off; }
    double* bias(std::size_t l) { return values.data() + layers[l].b_off; }

    void require_finite(const char* where) const {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const LayerView& v = layers[l];
            for (std::size_t i = 0; i < v.rows * v.cols + v.rows; ++i) {
                if (!std::isfinite(values[v.w_off + i])) {
                    throw numeric_error(std::string(where) + ": non-finite parameter in layer " +
                                        std::to_string(l));
                }
            }
        }
    }
};

// Uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
inline MlpParams init_mlp_params(const MlpSpec& spec, RngState& rng) {
    MlpParams p(spec);
    for (const auto& v : p.layers) {
        const double lim = std::sqrt(6.0 / static_cast<double>(v.cols + v.rows));
        for (std::size_t i = 0; i < v.rows * v.cols; ++i) {
            p.values[v.w_off + i] = (2.0 * rng.next_uniform() - 1.0) * lim;
        }
    }
    return p;
}

inline void make_features(double t, const double* x, std::size_t d, double* out) {
    for (std::size_t i = 0; i < d; ++i) out[i] = x[i];
    const double w = 2.0 * 3.14159265358979323846 * t;
    out[d] = t;
    out[d + 1] = std::sin(w);
    out[d + 2] = std::cos(w);
}

// Cached per-batch activations for the backward pass. acts[0] is the feature
// matrix; acts[l+1] is the post-activation output of hidden layer l; pre[l]
// the matching pre-activation. Everything is row-major (batch x dim).
struct MlpCache {
    std::size_t batch = 0;
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
    std::vector<double> out;
};

namespace detail {

// C (B x rows) = A (B x cols) * W^T + b, with W row-major (rows x cols).
inline void affine_forward(const double* A, std::size_t B, const double* W, const double* b,
                           std::size_t rows, std::size_t cols, double* C) {
    for (std::size_t i = 0; i < B; ++i) {
        const double* a = A + i * cols;
        double* c = C + i * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* w = W + r * cols;
            double s = b[r];
            for (std::size_t k = 0; k < cols; ++k) s += a[k] * w[k];
            c[r] = s;
        }
    }
}

}  // namespace detail

inline void mlp_forward_batch(const MlpParams& params, const std::vector<double>& t_batch,
                              const std::vector<double>& x_batch, MlpCache& cache) {
    const MlpSpec& spec = params.spec;
    const std::size_t B = t_batch.size();
    const std::size_t d = spec.input_dim;
    if (x_batch.size() != B * d) {
        throw shape_error("mlp_forward_batch: x batch size " + std::to_string(x_batch.size()) +
                          " != " + std::to_string(B) + "x" + std::to_string(d));
    }
    const std::size_t L = params.layers.size();
    cache.batch = B;
    cache.acts.assign(L, {});
    cache.pre.assign(L - 1, {});

    cache.acts[0].resize(B * spec.feature_dim());
    for (std::size_t i = 0; i < B; ++i) {
        make_features(t_batch[i], x_batch.data() + i * d, d, cache.acts[0].data() + i * spec.feature_dim());
    }
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const auto& v = params.layers[l];
        cache.pre[l].resize(B * v.rows);
        detail::affine_forward(cache.acts[l].data(), B, params.weight(l), params.bias(l), v.rows,
                               v.cols, cache.pre[l].data());
        cache.acts[l + 1].resize(B * v.rows);
        for (std::size_t i = 0; i < B * v.rows; ++i) cache.acts[l + 1][i] = silu(cache.pre[l][i]);
    }
    const auto& last = params.layers[L - 1];
    cache.out.resize(B * last.rows);
    detail::affine_forward(cache.acts[L - 1].data(), B, params.weight(L - 1), params.bias(L - 1),
                           last.rows, last.cols, cache.out.data());
}

// Single-probe forward; returns v and fills the cache for reuse.
inline Grid mlp_forward(const MlpParams& params, double t, const Grid& x, MlpCache& cache) {
    if (x.size() != params.spec.input_dim) {
        throw shape_error("mlp_forward: input size " + std::to_string(x.size()) + " != d " +
                          std::to_string(params.spec.input_dim));
    }
    const std::vector<double> tb{t};
    std::vector<double> xb(x.begin(), x.end());
    mlp_forward_batch(params, tb, xb, cache);
    Grid v(x.shape());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cache.out[i];
    return v;
}

// Mean over the batch of ||v_i - target_i||^2 from a completed forward cache.
inline double mlp_batch_loss(const MlpCache& cache, const std::vector<double>& target_batch) {
    if (target_batch.size() != cache.out.size()) {
        throw shape_error("mlp_batch_loss: target size mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < cache.out.size(); ++i) {
        const double r = cache.out[i] - target_batch[i];
        s += r * r;
    }
    return s / static_cast<double>(cache.batch);
}

// Gradient of mlp_batch_loss with respect to every parameter, by reverse
// accumulation through the cache. Output has the same flat layout as params.
inline std::vector<double> mlp_param_grads(const MlpParams& params, const MlpCache& cache,
                                           const std::vector<double>& target_batch) {
    const std::size_t B = cache.batch;
    const std::size_t L = params.layers.size();
    if (target_batch.size() != cache.out.size()) {
        throw shape_error("mlp_param_grads: target size mismatch");
    }
    std::vector<double> grads(params.size(), 0.0);

    const auto& last = params.layers[L - 1];
    std::vector<double> delta(B * last.rows);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] = 2.0 * (cache.out[i] - target_batch[i]) * inv_b;
    }

    for (std::size_t l = L; l-- > 0;) {
        const auto& v = params.layers[l];
        double* gw = grads.data() + v.w_off;
        double* gb = grads.data() + v.b_off;
        const std::vector<double>& in = cache.acts[l];
        for (std::size_t i = 0; i < B; ++i) {
            const double* din = delta.data() + i * v.rows;
            const double* a = in.data() + i * v.cols;
            for (std::size_t r = 0; r < v.rows; ++r) {
                const double dr = din[r];
                gb[r] += dr;
                double* gwr = gw + r * v.cols;
                for (std::size_t k = 0; k < v.cols; ++k) gwr[k] += dr * a[k];
            }
        }
        if (l == 0) break;
        // delta_prev = (delta * W) .* dsilu(pre[l-1])
        std::vector<double> prev(B * v.cols, 0.0);
        const double* W = params.weight(l);
        for (std::size_t i = 0; i < B; ++i) {
            const double* din = delta.data() + i * v.rows;
            double* dout = prev.data() + i * v.cols;
            for (std::size_t r = 0; r < v.rows; ++r) {
                const double dr = din[r];
                const double* wr = W + r * v.cols;
                for (std::size_t k = 0; k < v.cols; ++k) dout[k] += dr * wr[k];
            }
        }
        const std::vector<double>& pre = cache.pre[l - 1];
        for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= dsilu(pre[i]);
        delta = std::move(prev);
    }

    for (double g : grads) {
        if (!std::isfinite(g)) throw numeric_error("mlp_param_grads: non-finite gradient");
    }
    return grads;
}

// Mean CFM residual over explicit probe batches, usable with any field.
inline double cfm_loss(const VelocityField& field, const std::vector<Grid>& x0_batch,
                       const std::vector<Grid>& x1_batch, const std::vector<double>& t_batch) {
    const std::size_t B = t_batch.size();
    if (x0_batch.size() != B || x1_batch.size() != B) {
        throw shape_error("cfm_loss: batch size mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const Grid xt = interp_et(x0_batch[i], x1_batch[i], t_batch[i]);
        const Grid v = field.eval(t_batch[i], xt);
        require_same_shape(v, x1_batch[i], "cfm_loss");
        for (std::size_t j = 0; j < v.size(); ++j) {
            const double r = v[j] - (x1_batch[i][j] - x0_batch[i][j]);
            s += r * r;
        }
    }
    return s / static_cast<double>(B);
}

// VelocityField adapter over trained parameters. Accepts any grid whose size
// equals d, preserving the caller's shape.
class MlpField : public VelocityField {
public:
    explicit MlpField(MlpParams params) : params_(std::move(params)) {
        params_.require_finite("MlpField");
    }

    Grid eval(double t, const Grid& x) const override {
        check_field_args(t, x, params_.spec.input_dim, "MlpField");
        MlpCache cache;
        const std::vector<double> tb{t};
        std::vector<double> xb(x.begin(), x.end());
        mlp_forward_batch(params_, tb, xb, cache);
        Grid v(x.shape());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = cache.out[i];
        return v;
    }

    std::size_t dim() const override { return params_.spec.input_dim; }

    const MlpParams& params() const { return params_; }

private:
    MlpParams params_;
};

}  // namespace pnpflow
