#pragma once

#include <cmath>
#include <vector>

#include "pnpflow/errors.hpp"
#include "pnpflow/grid.hpp"

namespace pnpflow {

inline double mse(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "mse");
    return squared_distance(a, b) / static_cast<double>(a.size());
}

// 10 log10(peak^2 / mse), capped at 100 dB near-identical inputs. peak = 2
// matches data normalized to [-1, 1].
inline double psnr(const Grid& a, const Grid& b, double peak = 2.0) {
    if (!(peak > 0.0)) throw domain_error("psnr: peak must be positive");
    const double m = mse(a, b);
    if (m < peak * peak * 1e-10) return 100.0;
    return 10.0 * std::log10(peak * peak / m);
}

namespace detail {

inline std::vector<double> ssim_window() {
    // 11x11 Gaussian, sigma 1.5, normalized.
    std::vector<double> w(11 * 11);
    double sum = 0.0;
    for (int r = 0; r < 11; ++r) {
        for (int c = 0; c < 11; ++c) {
            const double dr = r - 5, dc = c - 5;
            const double v = std::exp(-(dr * dr + dc * dc) / (2.0 * 1.5 * 1.5));
            w[r * 11 + c] = v;
            sum += v;
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

inline double ssim_plane(const double* a, const double* b, std::size_t H, std::size_t W,
                         double C1, double C2) {
    static const std::vector<double> win = ssim_window();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + 11 <= H; ++r) {
        for (std::size_t c = 0; c + 11 <= W; ++c) {
            double ma = 0.0, mb = 0.0;
            for (std::size_t i = 0; i < 11; ++i) {
                for (std::size_t j = 0; j < 11; ++j) {
                    const double w = win[i * 11 + j];
                    ma += w * a[(r + i) * W + c + j];
                    mb += w * b[(r + i) * W + c + j];
                }
            }
            double va = 0.0, vb = 0.0, cov = 0.0;
            for (std::size_t i = 0; i < 11; ++i) {
                for (std::size_t j = 0; j < 11; ++j) {
                    const double w = win[i * 11 + j];
                    const double da = a[(r + i) * W + c + j] - ma;
                    const double db = b[(r + i) * W + c + j] - mb;
                    va += w * da * da;
                    vb += w * db * db;
                    cov += w * da * db;
                }
            }
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) /
                     ((ma * ma + mb * mb + C1) * (va + vb + C2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace detail

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03.
// Multi-channel inputs are averaged per channel plane.
inline double ssim(const Grid& a, const Grid& b, double data_range = 2.0) {
    require_same_shape(a, b, "ssim");
    if (!(data_range > 0.0)) throw domain_error("ssim: data_range must be positive");
    if (a.rank() < 2) throw shape_error("ssim: need a 2-D image");
    const std::size_t H = a.shape()[a.rank() - 2];
    const std::size_t W = a.shape()[a.rank() - 1];
    if (H < 11 || W < 11) throw shape_error("ssim: image smaller than the 11x11 window");
    std::size_t C = 1;
    for (std::size_t i = 0; i + 2 < a.rank(); ++i) C *= a.shape()[i];
    const double C1 = (0.01 * data_range) * (0.01 * data_range);
    const double C2 = (0.03 * data_range) * (0.03 * data_range);
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        total += detail::ssim_plane(a.data() + c * H * W, b.data() + c * H * W, H, W, C1, C2);
    }
    return total / static_cast<double>(C);
}

}  // namespace pnpflow
