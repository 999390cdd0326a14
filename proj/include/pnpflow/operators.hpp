#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pnpflow/errors.hpp"
#include "pnpflow/grid.hpp"
#include "pnpflow/rng.hpp"

namespace pnpflow {

// Discrete isotropic Gaussian, normalized to sum 1.
inline Grid gaussian_kernel(std::size_t size, double sigma_b) {
    if (size % 2 == 0) throw domain_error("gaussian_kernel: size must be odd");
    if (!(sigma_b > 0.0)) throw domain_error("gaussian_kernel: sigma_b must be positive");
    Grid k({size, size});
    const double c = (static_cast<double>(size) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t q = 0; q < size; ++q) {
            const double dr = static_cast<double>(r) - c;
            const double dq = static_cast<double>(q) - c;
            const double v = std::exp(-(dr * dr + dq * dq) / (2.0 * sigma_b * sigma_b));
            k[r * size + q] = v;
            sum += v;
        }
    }
    for (double& v : k) v /= sum;
    return k;
}

namespace detail {

// Leading dims are channels; the last two are the image plane.
inline void plane_dims(const std::vector<std::size_t>& shape, std::size_t& channels,
                       std::size_t& height, std::size_t& width, const char* who) {
    if (shape.size() < 2) {
        throw shape_error(std::string(who) + ": need a 2-D image shape");
    }
    height = shape[shape.size() - 2];
    width = shape[shape.size() - 1];
    channels = 1;
    for (std::size_t i = 0; i + 2 < shape.size(); ++i) channels *= shape[i];
}

inline std::size_t wrap(std::ptrdiff_t a, std::size_t m) {
    const std::ptrdiff_t mm = static_cast<std::ptrdiff_t>(m);
    std::ptrdiff_t r = a % mm;
    if (r < 0) r += mm;
    return static_cast<std::size_t>(r);
}

// Circular 2-D convolution per channel; flip=true convolves with the
// reflected kernel, which is the adjoint of flip=false.
inline Grid circ_conv(const Grid& x, const Grid& kernel, bool flip) {
    std::size_t C, H, W;
    plane_dims(x.shape(), C, H, W, "circ_conv");
    const std::size_t kh = kernel.shape()[0], kw = kernel.shape()[1];
    const std::ptrdiff_t ch = static_cast<std::ptrdiff_t>(kh) / 2;
    const std::ptrdiff_t cw = static_cast<std::ptrdiff_t>(kw) / 2;
    Grid out(x.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double* plane = x.data() + c * H * W;
        double* dst = out.data() + c * H * W;
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t q = 0; q < W; ++q) {
                double s = 0.0;
                for (std::size_t i = 0; i < kh; ++i) {
                    for (std::size_t j = 0; j < kw; ++j) {
                        const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(i) - ch;
                        const std::ptrdiff_t dq = static_cast<std::ptrdiff_t>(j) - cw;
                        const std::size_t sr =
                            flip ? wrap(static_cast<std::ptrdiff_t>(r) + dr, H)
                                 : wrap(static_cast<std::ptrdiff_t>(r) - dr, H);
                        const std::size_t sq =
                            flip ? wrap(static_cast<std::ptrdiff_t>(q) + dq, W)
                                 : wrap(static_cast<std::ptrdiff_t>(q) - dq, W);
                        s += kernel[i * kw + j] * plane[sr * W + sq];
                    }
                }
                dst[r * W + q] = s;
            }
        }
    }
    return out;
}

}  // namespace detail

// Linear degradation operator H with exact adjoint.
class DegradationOp {
public:
    enum class Kind { identity, mask_random, mask_box, conv_blur, downsample };

    static DegradationOp identity(std::vector<std::size_t> shape) {
        DegradationOp op(Kind::identity, std::move(shape));
        op.out_shape_ = op.in_shape_;
        return op;
    }

    // rate = fraction of entries zeroed; the mask is a pure function of seed.
    static DegradationOp mask_random(std::vector<std::size_t> shape, double rate,
                                     std::uint64_t seed) {
        if (!(rate >= 0.0 && rate <= 1.0)) {
            throw domain_error("DegradationOp: mask rate outside [0,1]");
        }
        DegradationOp op(Kind::mask_random, std::move(shape));
        op.out_shape_ = op.in_shape_;
        op.mask_ = Grid(op.in_shape_);
        RngState rng(seed);
        for (double& v : op.mask_) v = rng.next_uniform() < rate ? 0.0 : 1.0;
        return op;
    }

    // Zeroes the box rows [row0, row0+height) x cols [col0, col0+width).
    static DegradationOp mask_box(std::vector<std::size_t> shape, std::size_t row0,
                                  std::size_t col0, std::size_t height, std::size_t width) {
        DegradationOp op(Kind::mask_box, std::move(shape));
        op.out_shape_ = op.in_shape_;
        std::size_t C, H, W;
        detail::plane_dims(op.in_shape_, C, H, W, "mask_box");
        if (row0 + height > H || col0 + width > W) {
            throw domain_error("DegradationOp: box exceeds image bounds");
        }
        op.mask_ = Grid(op.in_shape_, 1.0);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t r = row0; r < row0 + height; ++r) {
                for (std::size_t q = col0; q < col0 + width; ++q) {
                    op.mask_[c * H * W + r * W + q] = 0.0;
                }
            }
        }
        return op;
    }

    static DegradationOp conv_blur(std::vector<std::size_t> shape, Grid kernel) {
        DegradationOp op(Kind::conv_blur, std::move(shape));
        op.out_shape_ = op.in_shape_;
        if (kernel.rank() != 2 || kernel.shape()[0] % 2 == 0 || kernel.shape()[1] % 2 == 0) {
            throw domain_error("DegradationOp: blur kernel must be 2-D with odd extents");
        }
        double sum = 0.0;
        for (double v : kernel) {
            if (v < 0.0) throw domain_error("DegradationOp: blur kernel entries must be >= 0");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw domain_error("DegradationOp: blur kernel must sum to 1");
        }
        std::size_t C, H, W;
        detail::plane_dims(op.in_shape_, C, H, W, "conv_blur");
        if (kernel.shape()[0] > H || kernel.shape()[1] > W) {
            throw domain_error("DegradationOp: kernel larger than image");
        }
        op.kernel_ = std::move(kernel);
        return op;
    }

    static DegradationOp downsample(std::vector<std::size_t> shape, std::size_t factor) {
        if (factor < 1) throw domain_error("DegradationOp: factor must be >= 1");
        DegradationOp op(Kind::downsample, std::move(shape));
        std::size_t C, H, W;
        detail::plane_dims(op.in_shape_, C, H, W, "downsample");
        if (H % factor != 0 || W % factor != 0) {
            throw domain_error("DegradationOp: factor must divide the image extents");
        }
        op.factor_ = factor;
        op.out_shape_ = op.in_shape_;
        op.out_shape_[op.out_shape_.size() - 2] = H / factor;
        op.out_shape_[op.out_shape_.size() - 1] = W / factor;
        return op;
    }

    Grid apply(const Grid& x) const {
        if (x.shape() != in_shape_) {
            throw shape_error("DegradationOp::apply: input shape mismatch");
        }
        switch (kind_) {
            case Kind::identity:
                return x;
            case Kind::mask_random:
            case Kind::mask_box: {
                Grid out = x;
                for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask_[i];
                return out;
            }
            case Kind::conv_blur:
                return detail::circ_conv(x, kernel_, false);
            case Kind::downsample: {
                std::size_t C, H, W;
                detail::plane_dims(in_shape_, C, H, W, "downsample");
                const std::size_t h = H / factor_, w = W / factor_;
                const double inv = 1.0 / static_cast<double>(factor_ * factor_);
                Grid out(out_shape_);
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t R = 0; R < h; ++R) {
                        for (std::size_t Q = 0; Q < w; ++Q) {
                            double s = 0.0;
                            for (std::size_t r = 0; r < factor_; ++r) {
                                for (std::size_t q = 0; q < factor_; ++q) {
                                    s += x[c * H * W + (R * factor_ + r) * W + Q * factor_ + q];
                                }
                            }
                            out[c * h * w + R * w + Q] = s * inv;
                        }
                    }
                }
                return out;
            }
        }
        throw domain_error("DegradationOp::apply: bad kind");
    }

    Grid adjoint(const Grid& u) const {
        if (u.shape() != out_shape_) {
            throw shape_error("DegradationOp::adjoint: input shape mismatch");
        }
        switch (kind_) {
            case Kind::identity:
                return u;
            case Kind::mask_random:
            case Kind::mask_box:
                return apply(u);  // diagonal 0/1, self-adjoint
            case Kind::conv_blur:
                return detail::circ_conv(u, kernel_, true);
            case Kind::downsample: {
                std::size_t C, H, W;
                detail::plane_dims(in_shape_, C, H, W, "downsample");
                const std::size_t h = H / factor_, w = W / factor_;
                const double inv = 1.0 / static_cast<double>(factor_ * factor_);
                Grid out(in_shape_);
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t R = 0; R < h; ++R) {
                        for (std::size_t Q = 0; Q < w; ++Q) {
                            const double v = u[c * h * w + R * w + Q] * inv;
                            for (std::size_t r = 0; r < factor_; ++r) {
                                for (std::size_t q = 0; q < factor_; ++q) {
                                    out[c * H * W + (R * factor_ + r) * W + Q * factor_ + q] = v;
                                }
                            }
                        }
                    }
                }
                return out;
            }
        }
        throw domain_error("DegradationOp::adjoint: bad kind");
    }

    Kind kind() const { return kind_; }
    const std::vector<std::size_t>& input_shape() const { return in_shape_; }
    const std::vector<std::size_t>& output_shape() const { return out_shape_; }
    const Grid& mask() const { return mask_; }
    const Grid& kernel() const { return kernel_; }
    std::size_t factor() const { return factor_; }

private:
    DegradationOp(Kind kind, std::vector<std::size_t> shape)
        : kind_(kind), in_shape_(std::move(shape)) {
        if (in_shape_.empty()) throw shape_error("DegradationOp: empty shape");
    }

    Kind kind_;
    std::vector<std::size_t> in_shape_, out_shape_;
    Grid mask_;
    Grid kernel_;
    std::size_t factor_ = 1;
};

}  // namespace pnpflow
