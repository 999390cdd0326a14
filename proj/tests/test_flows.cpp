#include <catch_amalgamated.hpp>

#include <cmath>

#include "pnpflow/distributions.hpp"
#include "pnpflow/fields.hpp"
#include "pnpflow/mc_loss.hpp"
#include "pnpflow/oracles.hpp"
#include "pnpflow/rng.hpp"

using namespace pnpflow;

TEST_CASE("field argument validation", "[fields]") {
    const GaussIndepField f(Grid::vec({0.0, 0.0}), 1.0);
    REQUIRE_THROWS_AS(f.eval(-0.1, Grid::vec({0.0, 0.0})), domain_error);
    REQUIRE_THROWS_AS(f.eval(1.1, Grid::vec({0.0, 0.0})), domain_error);
    REQUIRE_THROWS_AS(f.eval(0.5, Grid::vec({0.0})), shape_error);

    REQUIRE_THROWS_AS(GaussIndepField(Grid::vec({0.0}), 0.0), domain_error);
    REQUIRE_THROWS_AS(GaussOtField(Grid::vec({0.0}), -1.0), domain_error);
    REQUIRE_THROWS_AS(GmmIndepField({}), domain_error);
    REQUIRE_THROWS_AS(
        GmmIndepField({{0.5, Grid::vec({0.0}), 1.0}, {0.4, Grid::vec({1.0}), 1.0}}),
        domain_error);  // weights must sum to 1
}

TEST_CASE("single-Gaussian field matches the quadrature oracle", "[fields][oracle]") {
    const double m = 7.0, s = 0.5;
    const GaussIndepField field(Grid::vec({m}), s);
    const std::vector<Component1d> comps{{1.0, m, s}};
    for (int ti = 1; ti <= 9; ++ti) {
        const double t = ti / 10.0;
        for (int xi = -10; xi <= 10; ++xi) {
            const double x = t * m + 0.6 * xi;
            const double got = field.eval(t, Grid::vec({x}))[0];
            const double want = velocity_oracle_1d(comps, t, x);
            REQUIRE(got == Catch::Approx(want).margin(1e-6));
        }
    }
}

TEST_CASE("mixture field matches the quadrature oracle", "[fields][oracle]") {
    const std::vector<Component1d> comps{{0.3, -2.0, 0.4}, {0.7, 1.5, 0.8}};
    const GmmIndepField field(
        {{0.3, Grid::vec({-2.0}), 0.4}, {0.7, Grid::vec({1.5}), 0.8}});
    for (int ti = 1; ti <= 9; ++ti) {
        const double t = ti / 10.0;
        for (int xi = -10; xi <= 10; ++xi) {
            const double x = 0.5 * xi;
            const double got = field.eval(t, Grid::vec({x}))[0];
            const double want = velocity_oracle_1d(comps, t, x);
            REQUIRE(got == Catch::Approx(want).margin(1e-6));
        }
    }
}

TEST_CASE("symmetric mixture has zero velocity at the origin", "[fields]") {
    const GmmIndepField field(
        {{0.5, Grid::vec({-3.0}), 0.5}, {0.5, Grid::vec({3.0}), 0.5}});
    for (double t : {0.1, 0.5, 0.9}) {
        REQUIRE(field.eval(t, Grid::vec({0.0}))[0] == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("straight-line field is constant along its own paths", "[fields]") {
    const Grid m = Grid::vec({7.0, 7.0});
    const double s = 0.5;
    const GaussOtField field(m, s);
    RngState rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Grid eps({2});
        rng.fill_normal(eps);
        Grid target = m;
        axpy(target, s, eps);  // T(eps) = m + s eps
        const Grid v_want = sub(target, eps);
        for (double t : {0.0, 0.3, 0.77, 1.0}) {
            const Grid xt = interp_et(eps, target, t);
            const Grid v = field.eval(t, xt);
            REQUIRE(v[0] == Catch::Approx(v_want[0]).margin(1e-11));
            REQUIRE(v[1] == Catch::Approx(v_want[1]).margin(1e-11));
        }
    }
}

TEST_CASE("euler integration is exact on straight-line fields", "[fields]") {
    const Grid m = Grid::vec({7.0, 7.0});
    const double s = 0.5;
    const GaussOtField field(m, s);
    RngState rng(8);
    for (std::size_t n_steps : {1u, 7u, 100u}) {
        for (int trial = 0; trial < 10; ++trial) {
            Grid eps({2});
            rng.fill_normal(eps);
            const Grid got = euler_sample(field, eps, n_steps);
            for (std::size_t i = 0; i < 2; ++i) {
                REQUIRE(std::abs(got[i] - (m[i] + s * eps[i])) < 1e-12);
            }
        }
    }
}

TEST_CASE("euler pushforward has the target moments", "[fields]") {
    const Grid m = Grid::vec({7.0, 7.0});
    const double s = 0.5;
    const GaussIndepField field(m, s);
    RngState rng(99);
    const int n = 3000;
    double mean = 0.0, var = 0.0;
    std::vector<double> first;
    first.reserve(n);
    for (int i = 0; i < n; ++i) {
        Grid eps({2});
        rng.fill_normal(eps);
        const Grid x1 = euler_sample(field, eps, 100);
        mean += x1[0];
        first.push_back(x1[0]);
    }
    mean /= n;
    for (double v : first) var += (v - mean) * (v - mean);
    var /= n;
    REQUIRE(mean == Catch::Approx(7.0).margin(0.05));
    REQUIRE(var == Catch::Approx(0.25).margin(0.05));
}

TEST_CASE("denoiser is the identity at t=1", "[fields]") {
    const GaussIndepField field(Grid::vec({3.0, -1.0}), 0.7);
    const Grid x = Grid::vec({0.123, -4.56});
    const Grid out = denoise(field, 1.0, x);
    REQUIRE(out[0] == x[0]);
    REQUIRE(out[1] == x[1]);

    const ZeroField zero(2);
    for (double t : {0.0, 0.4, 1.0}) {
        const Grid z = denoise(zero, t, x);
        REQUIRE(z[0] == x[0]);
        REQUIRE(z[1] == x[1]);
    }
}

TEST_CASE("denoiser matches its definition", "[fields]") {
    const GaussIndepField field(Grid::vec({1.0}), 2.0);
    const double t = 0.35;
    const Grid x = Grid::vec({0.8});
    const Grid v = field.eval(t, x);
    const Grid d = denoise(field, t, x);
    REQUIRE(d[0] == x[0] + (1.0 - t) * v[0]);
}

TEST_CASE("zero-loss property of the straight OT flow", "[loss]") {
    const LatentSpec latent = LatentSpec::isotropic_gaussian(2);
    const TargetSpec target = TargetSpec::isotropic_gaussian(Grid::vec({7.0, 7.0}), 0.5);
    const GaussOtField field(Grid::vec({7.0, 7.0}), 0.5);
    RngState rng(17);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double loss =
            denoising_loss_mc(field, latent, target, Coupling::gaussian_ot, t, 2000, rng);
        REQUIRE(loss < 1e-10);
    }
}

TEST_CASE("independent coupling pays the conditional variance", "[loss]") {
    const double s = 0.5;
    const LatentSpec latent = LatentSpec::isotropic_gaussian(1);
    const TargetSpec target = TargetSpec::isotropic_gaussian(Grid::vec({7.0}), s);
    const GaussIndepField field(Grid::vec({7.0}), s);
    RngState rng(23);
    const double t = 0.5;
    const double loss =
        denoising_loss_mc(field, latent, target, Coupling::independent, t, 100000, rng);
    const double want = (1.0 - t) * (1.0 - t) * cond_var_gauss_indep(s, t);
    REQUIRE(loss == Catch::Approx(want).epsilon(0.03));
}

TEST_CASE("field gap is zero against itself and positive across couplings", "[loss]") {
    const LatentSpec latent = LatentSpec::isotropic_gaussian(2);
    const TargetSpec target = TargetSpec::isotropic_gaussian(Grid::vec({7.0, 7.0}), 0.5);
    const GaussIndepField indep(Grid::vec({7.0, 7.0}), 0.5);
    const GaussOtField ot(Grid::vec({7.0, 7.0}), 0.5);
    RngState rng(29);
    REQUIRE(fm_gap(indep, indep, latent, target, Coupling::independent, 0.5, 500, rng) == 0.0);
    REQUIRE(fm_gap(indep, ot, latent, target, Coupling::independent, 0.5, 2000, rng) > 1e-3);
}
