#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pnpflow/adam.hpp"
#include "pnpflow/distributions.hpp"
#include "pnpflow/errors.hpp"
#include "pnpflow/fidelity.hpp"
#include "pnpflow/fields.hpp"
#include "pnpflow/grid.hpp"
#include "pnpflow/metrics.hpp"
#include "pnpflow/operators.hpp"
#include "pnpflow/rng.hpp"

namespace pnpflow {

struct Schedule {
    enum class Kind { uniform, geometric };

    Kind kind = Kind::uniform;
    std::size_t n = 100;
    double q = 0.9;

    // t_n = n/N for n = 0..N-1; t never reaches 1.
    static Schedule uniform(std::size_t n_steps) {
        if (n_steps < 1) throw domain_error("Schedule: N must be >= 1");
        Schedule s;
        s.kind = Kind::uniform;
        s.n = n_steps;
        return s;
    }

    // t_n = 1 - q^n for n = 0..n_max-1; the gaps 1 - t_n are summable.
    static Schedule geometric(double q, std::size_t n_max) {
        if (!(q > 0.0 && q < 1.0)) throw domain_error("Schedule: q must be in (0,1)");
        if (n_max < 1) throw domain_error("Schedule: n_max must be >= 1");
        Schedule s;
        s.kind = Kind::geometric;
        s.n = n_max;
        s.q = q;
        return s;
    }

    std::size_t steps() const { return n; }

    std::vector<double> times() const {
        std::vector<double> t(n);
        if (kind == Kind::uniform) {
            for (std::size_t i = 0; i < n; ++i) {
                t[i] = static_cast<double>(i) / static_cast<double>(n);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                t[i] = 1.0 - std::pow(q, static_cast<double>(i));
            }
        }
        return t;
    }
};

// gamma_t = (1-t)^alpha. alpha = 1 short-circuits to exactly 1-t so that the
// summability stepsize gamma_n = 1-t_n is reproduced bit for bit.
inline double lr_schedule(double t, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw domain_error("lr_schedule: alpha outside (0,1]");
    if (!(t >= 0.0 && t <= 1.0)) throw domain_error("lr_schedule: t outside [0,1]");
    const double u = 1.0 - t;
    return alpha == 1.0 ? u : std::pow(u, alpha);
}

struct SolveConfig {
    Schedule schedule = Schedule::uniform(100);
    double alpha = 0.5;
    std::size_t K = 5;
    std::uint64_t seed = 0;
    std::optional<double> gamma_override;  // constant stepsize instead of (1-t)^alpha
    std::optional<Grid> x0;                // default: zero grid
    bool clip_noise = false;               // clamp eps entries to +-clip_threshold
    double clip_threshold = 6.0;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw config_error("SolveConfig: alpha outside (0,1]");
        if (K < 1) throw config_error("SolveConfig: K must be >= 1");
        if (clip_noise && !(clip_threshold > 0.0)) {
            throw config_error("SolveConfig: clip threshold must be positive");
        }
    }
};

struct SolveTrace {
    std::vector<double> t;
    std::vector<double> gamma;
    std::vector<double> delta_norm;  // ||x_{n+1} - x_n||
    std::vector<double> psnr;        // vs ground truth; NaN when no reference given
    double cumulative_delta = 0.0;
};

namespace detail {

inline Grid draw_latent_shaped(const LatentSpec& latent, const std::vector<std::size_t>& shape,
                               std::size_t count, RngState& rng, bool clip, double threshold) {
    if (latent.dim != count) {
        throw shape_error("pnp_flow_step: latent dim " + std::to_string(latent.dim) +
                          " != iterate size " + std::to_string(count));
    }
    Grid flat = draw_latent(latent, rng);
    if (clip) {
        for (double& v : flat) v = std::max(-threshold, std::min(threshold, v));
    }
    return Grid(shape, std::vector<double>(flat.begin(), flat.end()));
}

}  // namespace detail

// One iteration of the three-part update: gradient step on the data term,
// reprojection onto the path support, denoising. The K noise draws come from
// forked sub-streams keyed 0..K-1, so the average is order-independent.
inline Grid pnp_flow_step(const Grid& x, double t, double gamma, const Fidelity& fid,
                          const VelocityField& field, const LatentSpec& latent, std::size_t K,
                          const RngState& rng, bool clip_noise = false,
                          double clip_threshold = 6.0) {
    if (!(t >= 0.0 && t <= 1.0)) throw domain_error("pnp_flow_step: t outside [0,1]");
    if (K < 1) throw domain_error("pnp_flow_step: K must be >= 1");
    const Grid grad = datafit_grad(fid, x);
    Grid z = x;
    axpy(z, -gamma, grad);

    const double u = 1.0 - t;
    Grid acc(x.shape());
    for (std::size_t k = 0; k < K; ++k) {
        RngState krng = rng.fork(k);
        const Grid eps =
            detail::draw_latent_shaped(latent, x.shape(), x.size(), krng, clip_noise, clip_threshold);
        Grid probe(x.shape());
        for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = u * eps[i] + t * z[i];
        const Grid v = field.eval(t, probe);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += probe[i] + u * v[i];
    }
    const double inv_k = 1.0 / static_cast<double>(K);
    for (double& a : acc) a *= inv_k;
    if (!all_finite(acc)) {
        throw numeric_error("pnp_flow_step: non-finite iterate at t=" + std::to_string(t));
    }
    return acc;
}

// Algorithm loop: gamma_n = (1-t_n)^alpha unless overridden, one forked
// sub-stream per step index. reference, when given, adds a PSNR column.
inline std::pair<Grid, SolveTrace> pnp_flow_solve(const SolveConfig& config, const Fidelity& fid,
                                                  const VelocityField& field,
                                                  const LatentSpec& latent,
                                                  const Grid* reference = nullptr,
                                                  double peak = 2.0) {
    config.validate();
    Grid x = config.x0 ? *config.x0 : Grid(fid.op.input_shape());
    if (x.shape() != fid.op.input_shape()) {
        throw shape_error("pnp_flow_solve: x0 shape does not match the operator input");
    }
    const RngState base(config.seed);
    const std::vector<double> times = config.schedule.times();
    SolveTrace trace;
    trace.t.reserve(times.size());
    for (std::size_t n = 0; n < times.size(); ++n) {
        const double t = times[n];
        const double gamma =
            config.gamma_override ? *config.gamma_override : lr_schedule(t, config.alpha);
        const RngState srng = base.fork(n);
        Grid next = pnp_flow_step(x, t, gamma, fid, field, latent, config.K, srng,
                                  config.clip_noise, config.clip_threshold);
        const double delta = std::sqrt(squared_distance(next, x));
        if (max_abs(next) > 1e6) {
            throw numeric_error("pnp_flow_solve: iterate diverged at step " + std::to_string(n));
        }
        trace.t.push_back(t);
        trace.gamma.push_back(gamma);
        trace.delta_norm.push_back(delta);
        trace.psnr.push_back(reference ? psnr(next, *reference, peak)
                                       : std::numeric_limits<double>::quiet_NaN());
        trace.cumulative_delta += delta;
        x = std::move(next);
    }
    return {std::move(x), std::move(trace)};
}

// Fixed-time ablation: x <- D_t(x - gamma grad F(x)) with constant gamma and
// no reprojection. field == ZeroField reduces it to plain gradient descent.
inline Grid pnp_fbs_solve(const SolveConfig& config, const Fidelity& fid,
                          const VelocityField& field, double fixed_t, std::size_t n_iters) {
    config.validate();
    if (!(fixed_t >= 0.0 && fixed_t <= 1.0)) {
        throw domain_error("pnp_fbs_solve: fixed_t outside [0,1]");
    }
    const double gamma =
        config.gamma_override ? *config.gamma_override : lr_schedule(fixed_t, config.alpha);
    Grid x = config.x0 ? *config.x0 : Grid(fid.op.input_shape());
    if (x.shape() != fid.op.input_shape()) {
        throw shape_error("pnp_fbs_solve: x0 shape does not match the operator input");
    }
    for (std::size_t n = 0; n < n_iters; ++n) {
        const Grid grad = datafit_grad(fid, x);
        Grid z = x;
        axpy(z, -gamma, grad);
        x = denoise(field, fixed_t, z);
        if (!all_finite(x) || max_abs(x) > 1e6) {
            throw numeric_error("pnp_fbs_solve: iterate diverged at step " + std::to_string(n));
        }
    }
    return x;
}

struct BlindDeblurResult {
    Grid x;
    Grid kernel;
    std::vector<double> residual;        // ||y - H_learned x||, entry 0 = before any update
    std::vector<double> kernel_sum_err;  // |sum - 1| after each projection
    std::vector<double> kernel_min;      // min entry after each projection
};

namespace detail {

// d/dk[i,j] of 1/2 ||k (*) x - y||^2 under circular convolution.
inline Grid blur_kernel_grad(const Grid& resid, const Grid& x, std::size_t ksize) {
    std::size_t C, H, W;
    plane_dims(x.shape(), C, H, W, "blur_kernel_grad");
    const std::ptrdiff_t c0 = static_cast<std::ptrdiff_t>(ksize) / 2;
    Grid g({ksize, ksize});
    for (std::size_t i = 0; i < ksize; ++i) {
        for (std::size_t j = 0; j < ksize; ++j) {
            const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(i) - c0;
            const std::ptrdiff_t dq = static_cast<std::ptrdiff_t>(j) - c0;
            double s = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double* rp = resid.data() + c * H * W;
                const double* xp = x.data() + c * H * W;
                for (std::size_t r = 0; r < H; ++r) {
                    for (std::size_t q = 0; q < W; ++q) {
                        s += rp[r * W + q] * xp[wrap(static_cast<std::ptrdiff_t>(r) - dr, H) * W +
                                                wrap(static_cast<std::ptrdiff_t>(q) - dq, W)];
                    }
                }
            }
            g[i * ksize + j] = s;
        }
    }
    return g;
}

inline void project_simplex(Grid& kernel) {
    double sum = 0.0;
    for (double& v : kernel) {
        if (v < 0.0) v = 0.0;
        sum += v;
    }
    if (!(sum > 1e-12)) {
        // degenerate update wiped the kernel; restart from the delta
        for (double& v : kernel) v = 0.0;
        kernel[kernel.size() / 2] = 1.0;
        return;
    }
    for (double& v : kernel) v /= sum;
}

}  // namespace detail

// Alternates the image update (one flow step with the current kernel) with an
// Adam step on the kernel, re-projected onto the simplex each time.
inline BlindDeblurResult blind_deblur_solve(const Grid& y, const VelocityField& field,
                                            const LatentSpec& latent, const SolveConfig& config,
                                            std::size_t kernel_size, double kernel_lr,
                                            RngState& rng) {
    config.validate();
    if (kernel_size % 2 == 0) throw domain_error("blind_deblur_solve: kernel size must be odd");
    if (!(kernel_lr >= 0.0)) throw domain_error("blind_deblur_solve: kernel_lr must be >= 0");

    BlindDeblurResult res;
    res.kernel = Grid({kernel_size, kernel_size});
    res.kernel[res.kernel.size() / 2] = 1.0;  // delta init
    res.x = config.x0 ? *config.x0 : Grid(y.shape());
    if (res.x.shape() != y.shape()) {
        throw shape_error("blind_deblur_solve: x0 shape does not match y");
    }

    AdamConfig kcfg;
    kcfg.lr = kernel_lr > 0.0 ? kernel_lr : 1e-8;  // state is unused when lr = 0
    AdamState kopt(kcfg, kernel_size * kernel_size);

    {
        const DegradationOp H0 = DegradationOp::conv_blur(y.shape(), res.kernel);
        res.residual.push_back(std::sqrt(squared_distance(H0.apply(res.x), y)));
    }

    const std::vector<double> times = config.schedule.times();
    for (std::size_t n = 0; n < times.size(); ++n) {
        const double t = times[n];
        const double gamma =
            config.gamma_override ? *config.gamma_override : lr_schedule(t, config.alpha);
        const DegradationOp H = DegradationOp::conv_blur(y.shape(), res.kernel);
        const Fidelity fid = Fidelity::gaussian(H, y);
        res.x = pnp_flow_step(res.x, t, gamma, fid, field, latent, config.K, rng.fork(n),
                              config.clip_noise, config.clip_threshold);

        if (kernel_lr > 0.0) {
            const DegradationOp Hx = DegradationOp::conv_blur(y.shape(), res.kernel);
            const Grid resid = sub(Hx.apply(res.x), y);
            const Grid kg = detail::blur_kernel_grad(resid, res.x, kernel_size);
            std::vector<double> kvals(res.kernel.begin(), res.kernel.end());
            std::vector<double> gvals(kg.begin(), kg.end());
            adam_step(kopt, kvals, gvals);
            for (std::size_t i = 0; i < kvals.size(); ++i) res.kernel[i] = kvals[i];
            detail::project_simplex(res.kernel);
        }

        double ksum = 0.0, kmin = res.kernel[0];
        for (double v : res.kernel) {
            ksum += v;
            kmin = std::min(kmin, v);
        }
        res.kernel_sum_err.push_back(std::abs(ksum - 1.0));
        res.kernel_min.push_back(kmin);

        const DegradationOp Hn = DegradationOp::conv_blur(y.shape(), res.kernel);
        res.residual.push_back(std::sqrt(squared_distance(Hn.apply(res.x), y)));
        if (!all_finite(res.x) || max_abs(res.x) > 1e6) {
            throw numeric_error("blind_deblur_solve: iterate diverged at step " +
                                std::to_string(n));
        }
    }
    return res;
}

struct ConvergenceReport {
    double total_delta = 0.0;       // sum of ||x_{n+1} - x_n||
    std::vector<double> ratios;     // ||dx_n|| / (1 - t_n)
    double max_ratio = 0.0;         // the bound constant M
    bool bounded = false;
};

inline ConvergenceReport convergence_report(const SolveTrace& trace, const Schedule& schedule) {
    if (trace.t.empty()) throw validation_error("convergence_report: empty trace");
    if (trace.t.size() != schedule.steps()) {
        throw validation_error("convergence_report: trace/schedule length mismatch");
    }
    ConvergenceReport rep;
    rep.total_delta = trace.cumulative_delta;
    rep.ratios.reserve(trace.t.size());
    for (std::size_t n = 0; n < trace.t.size(); ++n) {
        const double gap = 1.0 - trace.t[n];
        double ratio;
        if (gap > 0.0) {
            ratio = trace.delta_norm[n] / gap;
        } else {
            ratio = trace.delta_norm[n] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        }
        rep.ratios.push_back(ratio);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
    }
    rep.bounded = std::isfinite(rep.max_ratio);
    return rep;
}

}  // namespace pnpflow
