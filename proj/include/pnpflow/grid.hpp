#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pnpflow/errors.hpp"

namespace pnpflow {

// Flat 64-bit tensor with shape metadata. Shapes are [d] for vectors,
// [H,W] or [C,H,W] for images. product(shape) == data.size() always.
class Grid {
public:
    Grid() = default;

    explicit Grid(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(checked_count(shape_), fill) {}

    Grid(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checked_count(shape_) != data_.size()) {
            throw shape_error("Grid: shape/data size mismatch");
        }
    }

    static Grid vec(std::initializer_list<double> values) {
        return Grid({values.size()}, std::vector<double>(values));
    }

    static Grid constant(std::vector<std::size_t> shape, double value) {
        return Grid(std::move(shape), value);
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>::iterator begin() { return data_.begin(); }
    std::vector<double>::iterator end() { return data_.end(); }
    std::vector<double>::const_iterator begin() const { return data_.begin(); }
    std::vector<double>::const_iterator end() const { return data_.end(); }

    bool same_shape(const Grid& other) const { return shape_ == other.shape_; }

private:
    static std::size_t checked_count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw shape_error("Grid: zero extent");
            n *= e;
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline std::string shape_string(const Grid& g) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < g.shape().size(); ++i) {
        if (i) os << ",";
        os << g.shape()[i];
    }
    os << "]";
    return os.str();
}

inline void require_same_shape(const Grid& a, const Grid& b, const char* where) {
    if (!a.same_shape(b)) {
        throw shape_error(std::string(where) + ": shape mismatch " + shape_string(a) +
                          " vs " + shape_string(b));
    }
}

inline void require_finite(const Grid& g, const char* where) {
    for (double v : g) {
        if (!std::isfinite(v)) {
            throw numeric_error(std::string(where) + ": non-finite entry");
        }
    }
}

inline bool all_finite(const Grid& g) {
    for (double v : g) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---- elementwise arithmetic ----

inline Grid add(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "add");
    Grid out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Grid sub(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "sub");
    Grid out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline Grid scale(const Grid& a, double c) {
    Grid out = a;
    for (double& v : out) v *= c;
    return out;
}

// a += c*b, in place.
inline void axpy(Grid& a, double c, const Grid& b) {
    require_same_shape(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

inline double dot(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const Grid& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

inline double norm(const Grid& a) { return std::sqrt(squared_norm(a)); }

inline double max_abs(const Grid& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline double squared_distance(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Straight-path interpolant (1-t)*x0 + t*x1.
inline Grid interp_et(const Grid& x0, const Grid& x1, double t) {
    require_same_shape(x0, x1, "interp_et");
    if (!(t >= 0.0 && t <= 1.0)) {
        throw domain_error("interp_et: t outside [0,1]");
    }
    Grid out = x0;
    const double u = 1.0 - t;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = u * x0[i] + t * x1[i];
    }
    return out;
}

}  // namespace pnpflow
