#pragma once

#include <cmath>
#include <cstdint>

#include "pnpflow/grid.hpp"

namespace pnpflow {

namespace detail {

// SplitMix64 finalizer; full-avalanche mixing of a 64-bit word.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Counter-based generator: the i-th draw is mix64(key + i*phi), so a state is
// just (key, counter). fork(index) derives an independent key, which makes
// sub-streams order-independent: forking for item k never consumes draws from
// the parent sequence.
class RngState {
public:
    explicit RngState(std::uint64_t seed)
        : key_(detail::mix64(detail::mix64(seed) ^ 0x5851f42d4c957f2dull)) {}

    RngState fork(std::uint64_t index) const {
        RngState child(*this);
        child.key_ = detail::mix64(key_ ^ detail::mix64(index ^ 0x14057b7ef767814full));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() {
        return detail::mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ull);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0,1]; safe under log().
    double next_uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Box-Muller, cosine branch only: every normal costs two uniforms, which
    // keeps the draw count a pure function of the call count.
    double next_normal() {
        const double u1 = next_uniform_pos();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi_ * u2);
    }

    double next_exponential() { return -std::log(next_uniform_pos()); }

    // Laplace(0, b) by inverse CDF.
    double next_laplace(double b) {
        const double u = next_uniform() - 0.5;
        const double s = u < 0.0 ? -1.0 : 1.0;
        return -b * s * std::log(1.0 - 2.0 * std::abs(u));
    }

    void fill_normal(Grid& g) {
        for (double& v : g) v = next_normal();
    }

private:
    static constexpr double pi_ = 3.14159265358979323846;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace pnpflow
