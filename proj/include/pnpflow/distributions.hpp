#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "pnpflow/grid.hpp"
#include "pnpflow/rng.hpp"

namespace pnpflow {

// Latent distribution P0.
struct LatentSpec {
    enum class Kind { isotropic_gaussian, dirichlet_uniform };

    Kind kind = Kind::isotropic_gaussian;
    std::size_t dim = 0;

    static LatentSpec isotropic_gaussian(std::size_t d) {
        if (d == 0) throw domain_error("LatentSpec: dim must be positive");
        return LatentSpec{Kind::isotropic_gaussian, d};
    }

    static LatentSpec dirichlet_uniform(std::size_t d) {
        if (d == 0) throw domain_error("LatentSpec: dim must be positive");
        return LatentSpec{Kind::dirichlet_uniform, d};
    }
};

struct MixtureComponent {
    double weight;
    Grid mean;
    double scale;
};

// Target distribution P1.
struct TargetSpec {
    enum class Kind { isotropic_gaussian, gaussian_mixture, empirical };

    Kind kind = Kind::isotropic_gaussian;
    Grid mean;                               // isotropic_gaussian
    double scale = 1.0;                      // isotropic_gaussian
    std::vector<MixtureComponent> components;
    std::shared_ptr<const std::vector<Grid>> dataset;

    static TargetSpec isotropic_gaussian(Grid mean, double s) {
        if (!(s > 0.0)) throw domain_error("TargetSpec: scale must be positive");
        TargetSpec spec;
        spec.kind = Kind::isotropic_gaussian;
        spec.mean = std::move(mean);
        spec.scale = s;
        return spec;
    }

    static TargetSpec gaussian_mixture(std::vector<MixtureComponent> comps) {
        if (comps.empty()) throw domain_error("TargetSpec: empty mixture");
        double wsum = 0.0;
        for (const auto& c : comps) {
            if (!(c.weight > 0.0)) throw domain_error("TargetSpec: weights must be positive");
            if (!(c.scale > 0.0)) throw domain_error("TargetSpec: scales must be positive");
            if (!c.mean.same_shape(comps.front().mean)) {
                throw shape_error("TargetSpec: mixture mean shapes differ");
            }
            wsum += c.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-12) {
            throw domain_error("TargetSpec: mixture weights must sum to 1");
        }
        TargetSpec spec;
        spec.kind = Kind::gaussian_mixture;
        spec.components = std::move(comps);
        return spec;
    }

    static TargetSpec empirical(std::shared_ptr<const std::vector<Grid>> data) {
        if (!data || data->empty()) throw domain_error("TargetSpec: empty dataset");
        TargetSpec spec;
        spec.kind = Kind::empirical;
        spec.dataset = std::move(data);
        return spec;
    }

    std::size_t dim() const {
        switch (kind) {
            case Kind::isotropic_gaussian: return mean.size();
            case Kind::gaussian_mixture: return components.front().mean.size();
            case Kind::empirical: return dataset->front().size();
        }
        return 0;
    }
};

inline Grid draw_latent(const LatentSpec& spec, RngState& rng) {
    Grid x({spec.dim});
    if (spec.kind == LatentSpec::Kind::isotropic_gaussian) {
        rng.fill_normal(x);
        return x;
    }
    // Dirichlet(1,...,1): normalized unit-rate exponentials; exact simplex point.
    double sum = 0.0;
    for (double& v : x) {
        v = rng.next_exponential();
        sum += v;
    }
    for (double& v : x) v /= sum;
    return x;
}

inline Grid draw_target(const TargetSpec& spec, RngState& rng) {
    switch (spec.kind) {
        case TargetSpec::Kind::isotropic_gaussian: {
            Grid x = spec.mean;
            for (double& v : x) v += spec.scale * rng.next_normal();
            return x;
        }
        case TargetSpec::Kind::gaussian_mixture: {
            const double u = rng.next_uniform();
            double acc = 0.0;
            const MixtureComponent* pick = &spec.components.back();
            for (const auto& c : spec.components) {
                acc += c.weight;
                if (u < acc) {
                    pick = &c;
                    break;
                }
            }
            Grid x = pick->mean;
            for (double& v : x) v += pick->scale * rng.next_normal();
            return x;
        }
        case TargetSpec::Kind::empirical: {
            const auto& data = *spec.dataset;
            const std::size_t i = rng.next_u64() % data.size();
            return data[i];
        }
    }
    throw domain_error("draw_target: bad spec");
}

inline std::vector<Grid> sample_latent(const LatentSpec& spec, std::size_t n, RngState& rng) {
    if (n == 0) throw domain_error("sample_latent: n must be >= 1");
    std::vector<Grid> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw_latent(spec, rng));
    return out;
}

inline std::vector<Grid> sample_target(const TargetSpec& spec, std::size_t n, RngState& rng) {
    if (n == 0) throw domain_error("sample_target: n must be >= 1");
    std::vector<Grid> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw_target(spec, rng));
    return out;
}

}  // namespace pnpflow
