#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pnpflow/fidelity.hpp"
#include "pnpflow/io.hpp"
#include "pnpflow/metrics.hpp"
#include "pnpflow/operators.hpp"
#include "pnpflow/rng.hpp"

using namespace pnpflow;

namespace {

Grid random_grid(const std::vector<std::size_t>& shape, RngState& rng) {
    Grid g(shape);
    rng.fill_normal(g);
    return g;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("gaussian kernel is a normalized symmetric bump", "[operators]") {
    const Grid k = gaussian_kernel(5, 1.2);
    REQUIRE(k.shape() == std::vector<std::size_t>{5, 5});
    double s = 0.0;
    for (double v : k) {
        REQUIRE(v > 0.0);
        s += v;
    }
    REQUIRE(s == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(k[0 * 5 + 0] == k[4 * 5 + 4]);
    REQUIRE(k[2 * 5 + 2] > k[0 * 5 + 0]);  // center dominates
    REQUIRE_THROWS_AS(gaussian_kernel(4, 1.0), domain_error);
}

TEST_CASE("identity operator copies bitwise", "[operators]") {
    RngState rng(1);
    const DegradationOp H = DegradationOp::identity({4, 4});
    const Grid x = random_grid({4, 4}, rng);
    const Grid y = H.apply(x);
    const Grid z = H.adjoint(y);
    for (std::size_t i = 0; i < x.size(); ++i) {
        REQUIRE(y[i] == x[i]);
        REQUIRE(z[i] == x[i]);
    }
}

TEST_CASE("random mask zeroes the requested fraction", "[operators]") {
    const DegradationOp H = DegradationOp::mask_random({64, 64}, 0.7, 5);
    double zeros = 0.0;
    for (double v : H.mask()) {
        REQUIRE((v == 0.0 || v == 1.0));
        zeros += v == 0.0 ? 1.0 : 0.0;
    }
    REQUIRE(zeros / 4096.0 == Catch::Approx(0.7).margin(0.03));

    // Same seed, same mask; different seed, different mask.
    const DegradationOp H2 = DegradationOp::mask_random({64, 64}, 0.7, 5);
    const DegradationOp H3 = DegradationOp::mask_random({64, 64}, 0.7, 6);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < H.mask().size(); ++i) {
        same = same && H.mask()[i] == H2.mask()[i];
        differ = differ || H.mask()[i] != H3.mask()[i];
    }
    REQUIRE(same);
    REQUIRE(differ);
}

TEST_CASE("masks are self-adjoint and idempotent", "[operators]") {
    RngState rng(2);
    const Grid x = random_grid({8, 8}, rng);
    for (const auto& H : {DegradationOp::mask_random({8, 8}, 0.4, 9),
                          DegradationOp::mask_box({8, 8}, 2, 3, 4, 2)}) {
        const Grid once = H.apply(x);
        const Grid twice = H.apply(once);
        const Grid adj = H.adjoint(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            REQUIRE(once[i] == twice[i]);
            REQUIRE(once[i] == adj[i]);
        }
    }
}

TEST_CASE("box mask zeroes exactly the box", "[operators]") {
    const DegradationOp H = DegradationOp::mask_box({6, 6}, 1, 2, 3, 2);
    Grid x({6, 6}, 1.0);
    const Grid y = H.apply(x);
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 6; ++c) {
            const bool inside = r >= 1 && r < 4 && c >= 2 && c < 4;
            REQUIRE(y[r * 6 + c] == (inside ? 0.0 : 1.0));
        }
    }
    REQUIRE_THROWS_AS(DegradationOp::mask_box({6, 6}, 4, 0, 3, 2), domain_error);
}

TEST_CASE("delta kernel makes blurring the identity", "[operators]") {
    Grid delta({3, 3}, 0.0);
    delta[4] = 1.0;
    const DegradationOp H = DegradationOp::conv_blur({5, 7}, delta);
    RngState rng(3);
    const Grid x = random_grid({5, 7}, rng);
    const Grid y = H.apply(x);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y[i] == x[i]);
}

TEST_CASE("circular blur commutes with circular shifts", "[operators]") {
    const DegradationOp H = DegradationOp::conv_blur({8, 8}, gaussian_kernel(3, 0.9));
    RngState rng(4);
    const Grid x = random_grid({8, 8}, rng);

    const auto shift = [](const Grid& g, std::size_t dr, std::size_t dc) {
        Grid out(g.shape());
        for (std::size_t r = 0; r < 8; ++r) {
            for (std::size_t c = 0; c < 8; ++c) {
                out[((r + dr) % 8) * 8 + (c + dc) % 8] = g[r * 8 + c];
            }
        }
        return out;
    };
    const Grid a = H.apply(shift(x, 3, 5));
    const Grid b = shift(H.apply(x), 3, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i] == Catch::Approx(b[i]).margin(1e-15));
    }
}

TEST_CASE("blur rejects bad kernels", "[operators]") {
    REQUIRE_THROWS_AS(DegradationOp::conv_blur({8, 8}, Grid({2, 2}, 0.25)), domain_error);
    Grid negative({3, 3}, 1.0 / 9.0);
    negative[0] = -negative[0];
    REQUIRE_THROWS_AS(DegradationOp::conv_blur({8, 8}, negative), domain_error);
    REQUIRE_THROWS_AS(DegradationOp::conv_blur({8, 8}, Grid({3, 3}, 0.2)), domain_error);
}

TEST_CASE("downsample block means and the composed identity", "[operators]") {
    const DegradationOp H = DegradationOp::downsample({4, 4}, 2);
    REQUIRE(H.output_shape() == std::vector<std::size_t>{2, 2});
    Grid x({4, 4});
    for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
    const Grid y = H.apply(x);
    REQUIRE(y[0] == Catch::Approx((0.0 + 1.0 + 4.0 + 5.0) / 4.0));
    REQUIRE(y[3] == Catch::Approx((10.0 + 11.0 + 14.0 + 15.0) / 4.0));

    // apply(adjoint(u)) divides by k^2 exactly, element by element.
    RngState rng(5);
    Grid u({2, 2});
    rng.fill_normal(u);
    const Grid round_trip = H.apply(H.adjoint(u));
    for (std::size_t i = 0; i < u.size(); ++i) {
        REQUIRE(round_trip[i] == u[i] / 4.0);
    }
    REQUIRE_THROWS_AS(DegradationOp::downsample({5, 5}, 2), domain_error);
}

TEST_CASE("adjoint dot test across operator kinds", "[operators]") {
    RngState rng(6);
    std::vector<DegradationOp> ops;
    ops.push_back(DegradationOp::mask_random({12, 12}, 0.5, 11));
    ops.push_back(DegradationOp::mask_box({12, 12}, 3, 3, 5, 5));
    ops.push_back(DegradationOp::conv_blur({12, 12}, gaussian_kernel(5, 1.0)));
    ops.push_back(DegradationOp::downsample({12, 12}, 2));
    ops.push_back(DegradationOp::downsample({12, 12}, 4));
    for (const auto& H : ops) {
        for (int trial = 0; trial < 20; ++trial) {
            const Grid x = random_grid(H.input_shape(), rng);
            const Grid u = random_grid(H.output_shape(), rng);
            const double lhs = dot(H.apply(x), u);
            const double rhs = dot(x, H.adjoint(u));
            REQUIRE(std::abs(lhs - rhs) < 1e-10 * norm(x) * norm(u));
        }
    }
}

TEST_CASE("degradation with zero noise is the bare operator", "[fidelity]") {
    RngState rng(7);
    const DegradationOp H = DegradationOp::conv_blur({6, 6}, gaussian_kernel(3, 1.0));
    const Grid x = random_grid({6, 6}, rng);
    RngState noise_rng(8);
    const Grid y = degrade(x, H, NoiseModel::gaussian(0.0), noise_rng);
    const Grid hx = H.apply(x);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == hx[i]);
}

TEST_CASE("gaussian noise level matches sigma", "[fidelity]") {
    const DegradationOp H = DegradationOp::identity({100, 100});
    const Grid x({100, 100}, 0.0);
    RngState rng(9);
    const Grid y = degrade(x, H, NoiseModel::gaussian(0.2), rng);
    REQUIRE(mse(y, x) == Catch::Approx(0.04).epsilon(0.05));
}

TEST_CASE("weighted fidelity scales the unweighted one", "[fidelity]") {
    RngState rng(10);
    const DegradationOp H = DegradationOp::identity({3, 3});
    const Grid y = random_grid({3, 3}, rng);
    const Grid x = random_grid({3, 3}, rng);
    const double sigma = 0.5;
    const Fidelity plain = Fidelity::gaussian(H, y);
    const Fidelity weighted = Fidelity::gaussian_weighted(H, y, sigma);
    REQUIRE(datafit_value(weighted, x) ==
            Catch::Approx(datafit_value(plain, x) / (sigma * sigma)).margin(1e-12));
    const Grid gp = datafit_grad(plain, x);
    const Grid gw = datafit_grad(weighted, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        REQUIRE(gw[i] == Catch::Approx(gp[i] / (sigma * sigma)).margin(1e-12));
    }
}

TEST_CASE("laplace fidelity has a sign-vector gradient", "[fidelity]") {
    const DegradationOp H = DegradationOp::identity({3});
    const Grid y = Grid::vec({0.0, 1.0, -1.0});
    const Fidelity fid = Fidelity::laplace(H, y);
    const Grid x = Grid::vec({1.0, 1.0, -3.0});
    REQUIRE(datafit_value(fid, x) == Catch::Approx(1.0 + 0.0 + 2.0));
    const Grid g = datafit_grad(fid, x);
    REQUIRE(g[0] == 1.0);
    REQUIRE(g[1] == 0.0);  // sign(0) = 0
    REQUIRE(g[2] == -1.0);
}

TEST_CASE("gradients match finite differences for every fidelity", "[fidelity]") {
    RngState rng(11);
    const std::vector<std::size_t> shape{6, 6};
    std::vector<Fidelity> fids;
    const DegradationOp blur = DegradationOp::conv_blur(shape, gaussian_kernel(3, 0.7));
    const DegradationOp down = DegradationOp::downsample(shape, 2);
    const DegradationOp mask = DegradationOp::mask_random(shape, 0.3, 21);
    fids.push_back(Fidelity::gaussian(blur, random_grid(blur.output_shape(), rng)));
    fids.push_back(Fidelity::gaussian_weighted(down, random_grid(down.output_shape(), rng), 0.7));
    fids.push_back(Fidelity::gaussian(mask, random_grid(mask.output_shape(), rng)));
    for (const auto& fid : fids) {
        const Grid x = random_grid(shape, rng);
        const Grid g = datafit_grad(fid, x);
        const double h = 1e-6;
        for (std::size_t i = 0; i < x.size(); i += 5) {
            Grid xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (datafit_value(fid, xp) - datafit_value(fid, xm)) / (2.0 * h);
            REQUIRE(g[i] == Catch::Approx(fd).margin(1e-5));
        }
    }
}

TEST_CASE("conjugate-Gaussian posterior mean", "[fidelity]") {
    const Grid y = Grid::vec({2.0, -1.0});
    const Grid m = Grid::vec({7.0, 7.0});
    const double s = 0.5, sigma = 1.5;
    const Grid x = map_oracle_gaussian_denoise(y, m, s, sigma);
    const double w = s * s / (s * s + sigma * sigma);
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(x[i] == Catch::Approx(w * y[i] + (1.0 - w) * m[i]).margin(1e-12));
    }

    // Stationarity of the MAP objective: grad F/sigma^2 + prior grad = 0.
    const DegradationOp H = DegradationOp::identity({2});
    const Fidelity fid = Fidelity::gaussian_weighted(H, y, sigma);
    const Grid g = datafit_grad(fid, x);
    for (std::size_t i = 0; i < 2; ++i) {
        const double prior = (x[i] - m[i]) / (s * s);
        REQUIRE(g[i] + prior == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("mse basics", "[metrics]") {
    const Grid x = Grid::vec({1.0, 2.0});
    REQUIRE(mse(x, x) == 0.0);
    REQUIRE(mse(Grid::vec({0.0}), Grid::vec({2.0})) == 4.0);
    const Grid a = Grid::vec({1.0, -3.0});
    const Grid b = Grid::vec({0.5, 0.5});
    REQUIRE(mse(scale(a, 3.0), scale(b, 3.0)) == Catch::Approx(9.0 * mse(a, b)));
    REQUIRE(mse(a, b) == mse(b, a));
    REQUIRE_THROWS_AS(mse(x, Grid::vec({1.0})), shape_error);
}

TEST_CASE("psnr conventions", "[metrics]") {
    const Grid x({10, 10}, 0.3);
    REQUIRE(psnr(x, x) == 100.0);  // cap
    Grid y = x;
    for (double& v : y) v += 2.0;  // mse = 4 = peak^2
    REQUIRE(psnr(x, y) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(psnr(x, y, 2.0) == psnr(y, x, 2.0));
    REQUIRE_THROWS_AS(psnr(x, y, 0.0), domain_error);
}

TEST_CASE("noisy image scores the pinned psnr", "[metrics]") {
    RngState rng(12);
    Grid clean({100, 100});
    for (double& v : clean) v = 2.0 * rng.next_uniform() - 1.0;
    Grid noisy = clean;
    for (double& v : noisy) v += 0.2 * rng.next_normal();
    REQUIRE(psnr(clean, noisy, 2.0) == Catch::Approx(20.0).margin(0.15));
}

TEST_CASE("ssim identities", "[metrics]") {
    RngState rng(13);
    Grid x({16, 16});
    for (double& v : x) v = std::tanh(rng.next_normal());
    REQUIRE(ssim(x, x) == 1.0);

    // Constant images: closed form, variance terms vanish.
    const double u = 0.3, w = -0.2, range = 2.0;
    const double c1 = (0.01 * range) * (0.01 * range);
    const Grid a({16, 16}, u), b({16, 16}, w);
    const double want = (2.0 * u * w + c1) / (u * u + w * w + c1);
    REQUIRE(ssim(a, b, range) == Catch::Approx(want).margin(1e-12));

    REQUIRE_THROWS_AS(ssim(Grid({8, 8}, 0.0), Grid({8, 8}, 0.0)), shape_error);
}

TEST_CASE("ssim decreases with heavier corruption", "[metrics]") {
    RngState rng(14);
    Grid clean({32, 32});
    for (std::size_t r = 0; r < 32; ++r) {
        for (std::size_t c = 0; c < 32; ++c) {
            clean[r * 32 + c] = std::sin(0.4 * r) * std::cos(0.3 * c);
        }
    }
    Grid mild = clean, heavy = clean;
    RngState n1(15), n2(16);
    for (double& v : mild) v += 0.05 * n1.next_normal();
    for (double& v : heavy) v += 0.5 * n2.next_normal();
    REQUIRE(ssim(clean, heavy) < ssim(clean, mild));
    REQUIRE(ssim(clean, mild) < 1.0);
}

TEST_CASE("netpbm round trip stays within quantization error", "[io]") {
    RngState rng(17);
    Grid gray({9, 13});
    for (double& v : gray) v = 2.0 * rng.next_uniform() - 1.0;
    const auto p5 = temp_file("pnpflow_test.pgm");
    write_netpbm(p5.string(), gray);
    const Grid back = read_netpbm(p5.string());
    REQUIRE(back.shape() == gray.shape());
    for (std::size_t i = 0; i < gray.size(); ++i) {
        REQUIRE(std::abs(back[i] - gray[i]) <= 1.0 / 255.0);
    }

    Grid color({3, 4, 5});
    for (double& v : color) v = 2.0 * rng.next_uniform() - 1.0;
    const auto p6 = temp_file("pnpflow_test.ppm");
    write_netpbm(p6.string(), color);
    const Grid back6 = read_netpbm(p6.string());
    REQUIRE(back6.shape() == color.shape());
    for (std::size_t i = 0; i < color.size(); ++i) {
        REQUIRE(std::abs(back6[i] - color[i]) <= 1.0 / 255.0);
    }
    std::filesystem::remove(p5);
    std::filesystem::remove(p6);
}

TEST_CASE("netpbm extremes map to byte extremes", "[io]") {
    const auto path = temp_file("pnpflow_extreme.pgm");
    write_netpbm(path.string(), Grid({2, 2}, -1.0));
    {
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        REQUIRE(all.size() >= 4);
        for (std::size_t i = all.size() - 4; i < all.size(); ++i) {
            REQUIRE(static_cast<unsigned char>(all[i]) == 0);
        }
    }
    write_netpbm(path.string(), Grid({2, 2}, 1.0));
    {
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        for (std::size_t i = all.size() - 4; i < all.size(); ++i) {
            REQUIRE(static_cast<unsigned char>(all[i]) == 255);
        }
    }
    REQUIRE_THROWS_AS(write_netpbm(path.string(), Grid({2, 2}, 1.5)), validation_error);
    std::filesystem::remove(path);
}

TEST_CASE("netpbm read rejects malformed input", "[io]") {
    const auto path = temp_file("pnpflow_malformed.pgm");
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n3 3\n255\nab";  // truncated payload
    }
    REQUIRE_THROWS_AS(read_netpbm(path.string()), io_error);
    {
        std::ofstream out(path, std::ios::binary);
        out << "P4\n3 3\n255\n123456789";
    }
    REQUIRE_THROWS_AS(read_netpbm(path.string()), io_error);
    std::filesystem::remove(path);
}

TEST_CASE("points csv round trips bitwise", "[io]") {
    RngState rng(18);
    std::vector<Grid> pts;
    for (int i = 0; i < 1000; ++i) {
        Grid p({2});
        rng.fill_normal(p);
        pts.push_back(p);
    }
    const auto path = temp_file("pnpflow_points.csv");
    write_points_csv(path.string(), pts);
    const auto back = read_points_csv(path.string());
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        REQUIRE(back[i][0] == pts[i][0]);
        REQUIRE(back[i][1] == pts[i][1]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("points csv edge cases", "[io]") {
    const auto path = temp_file("pnpflow_points_edge.csv");
    write_points_csv(path.string(), {});
    REQUIRE(read_points_csv(path.string()).empty());

    {
        std::ofstream out(path);
        out << "x,y\n1.5,2.5\n3.5,4.5\n";
    }
    const auto pts = read_points_csv(path.string());
    REQUIRE(pts.size() == 2);
    REQUIRE(pts[0][0] == 1.5);
    REQUIRE(pts[1][1] == 4.5);

    {
        std::ofstream out(path);
        out << "1.0,2.0\nnot,a,number\n";
    }
    try {
        (void)read_points_csv(path.string());
        FAIL("expected io_error");
    } catch (const io_error& e) {
        REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("loss csv format", "[io]") {
    const auto path = temp_file("pnpflow_loss.csv");
    write_loss_csv(path.string(), {2.5, 1.25});
    std::ifstream in(path);
    std::string l0, l1, l2;
    std::getline(in, l0);
    std::getline(in, l1);
    std::getline(in, l2);
    REQUIRE(l0 == "step,loss");
    REQUIRE(l1.rfind("1,", 0) == 0);
    REQUIRE(l2.rfind("2,", 0) == 0);
    std::filesystem::remove(path);
}
