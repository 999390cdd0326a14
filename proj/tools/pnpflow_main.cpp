// Command-line front end: train / sample / solve / eval / gridsearch / check.
// Exit codes: 0 success, 1 validation or usage failure, 2 runtime failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnpflow/pnpflow.hpp"

namespace {

using namespace pnpflow;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

Config load_config(const CommonOpts& opts) {
    Config cfg;
    if (!opts.config_path.empty()) cfg = Config::parse_file(opts.config_path);
    for (const auto& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw config_error("--set expects key=value, got '" + kv + "'");
        }
        cfg.set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    if (opts.seed) {
        const std::string s = std::to_string(*opts.seed);
        cfg.set("experiment.seed", s);
        cfg.set("solve.seed", s);
        cfg.set("train.seed", s);
    }
    if (opts.out) cfg.set("experiment.out", *opts.out);
    return cfg;
}

std::vector<std::size_t> parse_widths(const Config& cfg) {
    if (!cfg.has("train.widths")) return {256, 256};
    return detail::parse_size_list(cfg.get_string("train.widths"), "train.widths");
}

int cmd_train(const CommonOpts& opts) {
    const Config cfg = load_config(opts);
    const ExperimentConfig ec = ExperimentConfig::from_config(cfg);

    TrainConfig tc;
    tc.batch = static_cast<std::size_t>(cfg.get_int("train.batch", 128));
    tc.steps = static_cast<std::size_t>(cfg.get_int("train.steps", 2000));
    tc.seed = cfg.get_u64("train.seed", ec.seed);
    tc.adam.lr = cfg.get_double("train.lr", 1e-4);
    tc.adam.beta1 = cfg.get_double("train.beta1", 0.9);
    tc.adam.beta2 = cfg.get_double("train.beta2", 0.99);
    tc.adam.eps = cfg.get_double("train.eps", 1e-8);
    const std::string coupling = cfg.get_string("train.coupling", "independent");
    if (coupling == "independent") {
        tc.coupling = TrainCoupling::independent;
    } else if (coupling == "minibatch_ot") {
        tc.coupling = TrainCoupling::minibatch_ot;
    } else {
        throw config_error("train.coupling: expected independent or minibatch_ot");
    }
    if (ec.target_is_dataset) {
        tc.target = TargetSpec::empirical(
            std::make_shared<const std::vector<Grid>>(ec.dataset));
    } else {
        tc.target = ec.target;
    }
    const std::size_t dim = tc.target.dim();
    const std::string latent = cfg.get_string("train.latent", "gaussian");
    if (latent == "gaussian") {
        tc.latent = LatentSpec::isotropic_gaussian(dim);
    } else if (latent == "dirichlet") {
        tc.latent = LatentSpec::dirichlet_uniform(dim);
    } else {
        throw config_error("train.latent: expected gaussian or dirichlet");
    }

    MlpSpec spec;
    spec.input_dim = dim;
    spec.widths = parse_widths(cfg);

    RngState rng(tc.seed);
    const TrainResult res = train_cfm(tc, spec, rng);

    namespace fs = std::filesystem;
    fs::create_directories(ec.out_dir);
    const std::string params_path = (fs::path(ec.out_dir) / "params.bin").string();
    const std::string loss_path = (fs::path(ec.out_dir) / "loss.csv").string();
    save_mlp_params(params_path, res.params);
    write_loss_csv(loss_path, res.loss_curve);

    const std::size_t tail = std::min<std::size_t>(100, res.loss_curve.size());
    double tail_mean = 0.0;
    for (std::size_t i = res.loss_curve.size() - tail; i < res.loss_curve.size(); ++i) {
        tail_mean += res.loss_curve[i];
    }
    tail_mean /= static_cast<double>(tail);
    std::cout << "trained " << tc.steps << " steps, final loss " << res.loss_curve.back()
              << ", last-" << tail << " mean " << tail_mean << "\n"
              << "wrote " << params_path << " and " << loss_path << "\n";
    return 0;
}

int cmd_sample(const CommonOpts& opts) {
    const Config cfg = load_config(opts);
    const ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    const auto field = ec.make_field();
    const std::size_t n = static_cast<std::size_t>(cfg.get_int("sample.n", 1000));
    const std::size_t steps = static_cast<std::size_t>(cfg.get_int("sample.steps", 100));
    if (n < 1 || steps < 1) throw config_error("sample.n and sample.steps must be >= 1");

    const LatentSpec latent = LatentSpec::isotropic_gaussian(field->dim());
    RngState rng(cfg.get_u64("sample.seed", ec.seed));
    std::vector<Grid> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RngState irng = rng.fork(i);
        pts.push_back(euler_sample(*field, draw_latent(latent, irng), steps));
    }
    namespace fs = std::filesystem;
    fs::create_directories(ec.out_dir);
    const std::string path = (fs::path(ec.out_dir) / "samples.csv").string();
    write_points_csv(path, pts);
    std::cout << "wrote " << n << " samples to " << path << "\n";
    return 0;
}

int cmd_solve(const CommonOpts& opts) {
    const Config cfg = load_config(opts);
    const ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    const Manifest man = run_experiment(ec);
    std::cout << "task " << man.task << ", " << man.items.size() << "/" << ec.n_items
              << " items ok\n"
              << "aggregate mse " << man.aggregate.mse << ", psnr " << man.aggregate.psnr
              << " dB, ssim " << man.aggregate.ssim << "\n"
              << "degraded psnr " << man.aggregate_degraded.psnr << " dB\n"
              << "manifest " << (std::filesystem::path(ec.out_dir) / "manifest.json").string()
              << "\n";
    for (const auto& e : man.item_errors) std::cerr << "item failed: " << e << "\n";
    return man.items.empty() ? 2 : 0;
}

Grid load_any(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".pgm" || ext == ".ppm") return read_netpbm(path);
    if (ext == ".csv") {
        const auto pts = read_points_csv(path);
        if (pts.empty()) throw validation_error("eval: empty point file " + path);
        Grid flat({pts.size(), pts.front().size()});
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = 0; j < pts[i].size(); ++j) {
                flat[i * pts.front().size() + j] = pts[i][j];
            }
        }
        return flat;
    }
    throw validation_error("eval: unsupported file type " + path);
}

int cmd_eval(const std::string& a_path, const std::string& b_path, double peak) {
    const Grid a = load_any(a_path);
    const Grid b = load_any(b_path);
    std::cout << "mse " << mse(a, b) << "\n";
    std::cout << "psnr " << psnr(a, b, peak) << "\n";
    const bool image = a.rank() >= 2 && a.shape()[a.rank() - 2] >= 11 &&
                       a.shape()[a.rank() - 1] >= 11;
    if (image) {
        std::cout << "ssim " << ssim(a, b, peak) << "\n";
    } else {
        std::cout << "ssim n/a\n";
    }
    return 0;
}

int cmd_gridsearch(const CommonOpts& opts) {
    const Config cfg = load_config(opts);
    const ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    std::vector<double> alphas{0.01, 0.1, 0.3, 0.5, 0.8, 1.0};
    std::vector<std::size_t> ns{100, 200, 500};
    if (cfg.has("gridsearch.alphas")) {
        alphas = detail::parse_double_list(cfg.get_string("gridsearch.alphas"),
                                           "gridsearch.alphas");
    }
    if (cfg.has("gridsearch.ns")) {
        ns = detail::parse_size_list(cfg.get_string("gridsearch.ns"), "gridsearch.ns");
    }
    const std::size_t items =
        static_cast<std::size_t>(cfg.get_int("gridsearch.items", 4));

    const GridSearchResult res = grid_search(ec, alphas, ns, items);
    namespace fs = std::filesystem;
    fs::create_directories(ec.out_dir);
    const std::string table_path = (fs::path(ec.out_dir) / "score_table.csv").string();
    write_score_table_csv(table_path, res.table);
    const std::string best_path = (fs::path(ec.out_dir) / "best_config.txt").string();
    {
        std::ofstream out(best_path);
        out << res.best.raw.serialize();
    }
    std::cout << "best alpha " << res.best_cell.alpha << ", steps " << res.best_cell.n_steps
              << ", psnr " << res.best_cell.score << " dB\n"
              << "wrote " << table_path << " and " << best_path << "\n";
    return 0;
}

bool report(const char* name, bool ok) {
    std::cout << (ok ? "ok     " : "FAILED ") << name << "\n";
    return ok;
}

int cmd_check() {
    bool all = true;

    {
        RngState a(123), b(123);
        bool same = true;
        for (int i = 0; i < 16; ++i) same = same && a.next_u64() == b.next_u64();
        RngState f0 = RngState(123).fork(0), f1 = RngState(123).fork(1);
        all &= report("rng: identical seeds replay, forks differ",
                      same && f0.next_u64() != f1.next_u64());
    }
    {
        const QuadRule rule = gauss_hermite(64);
        double sw = 0.0;
        for (double w : rule.weights) sw += w;
        const double sqrt_pi = 1.7724538509055160273;
        const double quad = integrate01([](double t) { return t * t; }, 64);
        all &= report("quadrature: Hermite weights and Legendre moment",
                      std::abs(sw - sqrt_pi) < 1e-12 && std::abs(quad - 1.0 / 3.0) < 1e-12);
    }
    {
        RngState rng(7);
        const std::vector<std::size_t> shape{16, 16};
        std::vector<DegradationOp> ops;
        ops.push_back(DegradationOp::conv_blur(shape, gaussian_kernel(5, 1.0)));
        ops.push_back(DegradationOp::downsample(shape, 2));
        ops.push_back(DegradationOp::mask_random(shape, 0.5, 3));
        bool ok = true;
        for (const auto& H : ops) {
            Grid x(H.input_shape()), u(H.output_shape());
            rng.fill_normal(x);
            rng.fill_normal(u);
            ok = ok && std::abs(dot(H.apply(x), u) - dot(x, H.adjoint(u))) < 1e-10;
        }
        all &= report("operators: <Hx,u> == <x,H'u>", ok);
    }
    {
        RngState rng(11);
        const std::vector<std::size_t> shape{8, 8};
        const DegradationOp H = DegradationOp::conv_blur(shape, gaussian_kernel(3, 0.8));
        Grid x(shape), y0(shape);
        rng.fill_normal(x);
        rng.fill_normal(y0);
        const Fidelity fid = Fidelity::gaussian(H, y0);
        const Grid g = datafit_grad(fid, x);
        const double h = 1e-6;
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); i += 7) {
            Grid xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (datafit_value(fid, xp) - datafit_value(fid, xm)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(fd)));
        }
        all &= report("fidelity: gradient matches finite differences", worst < 1e-5);
    }
    {
        // The exact conditional-expectation field attains the quadrature floor.
        const double s = 0.7;
        const std::size_t d = 2;
        const GaussIndepField field(Grid({d}), s);
        const LatentSpec latent = LatentSpec::isotropic_gaussian(d);
        const TargetSpec target = TargetSpec::isotropic_gaussian(Grid({d}), s);
        RngState rng(5);
        double loss = 0.0, floor = 0.0;
        const std::size_t n_t = 16;
        for (std::size_t i = 0; i < n_t; ++i) {
            const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n_t);
            loss += denoising_loss_mc(field, latent, target, Coupling::independent, t, 4000, rng);
            // denoiser error = (1-t) * velocity error, so the floor picks up (1-t)^2
            floor += (1.0 - t) * (1.0 - t) * static_cast<double>(d) * cond_var_gauss_indep(s, t);
        }
        all &= report("flow loss: analytic field sits on the variance floor",
                      std::abs(loss - floor) / floor < 0.05);
    }
    {
        // With gamma = 1 - t and K = 1 the update must equal the two-stage
        // interpolate-then-denoise computation bit for bit.
        const std::size_t d = 2;
        const GaussOtField field(Grid::vec({1.0, -2.0}), 0.6);
        const LatentSpec latent = LatentSpec::isotropic_gaussian(d);
        const DegradationOp H = DegradationOp::identity({d});
        const Grid y = Grid::vec({0.5, 0.25});
        const Fidelity fid = Fidelity::gaussian(H, y);
        const Grid x = Grid::vec({0.3, -0.7});
        const double t = 0.375;
        const double gamma = 1.0 - t;
        const RngState step_rng = RngState(99).fork(0);

        const Grid got = pnp_flow_step(x, t, gamma, fid, field, latent, 1, step_rng);
        Grid z = x;
        axpy(z, -gamma, datafit_grad(fid, x));
        RngState krng = step_rng.fork(0);
        const Grid eps = detail::draw_latent_shaped(latent, x.shape(), x.size(), krng, false, 6.0);
        Grid probe(x.shape());
        for (std::size_t i = 0; i < d; ++i) probe[i] = (1.0 - t) * eps[i] + t * z[i];
        Grid expect = denoise(field, t, probe);
        bool ok = true;
        for (std::size_t i = 0; i < d; ++i) ok = ok && got[i] == expect[i];
        all &= report("solver: interpolation-law step is exact at gamma=1-t", ok);
    }
    std::cout << (all ? "all checks passed" : "CHECK FAILURES") << "\n";
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Plug-and-play flow-matching toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string eval_a, eval_b;
    double eval_peak = 2.0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", opts.config_path, "config file path");
        if (config_required) c->required();
        sub->add_option("--seed", opts.seed, "override the run seed");
        sub->add_option("--out", opts.out, "override the output directory");
        sub->add_option("--set", opts.sets, "override a config key (section.key=value)");
    };

    auto* train = app.add_subcommand("train", "train the MLP velocity field");
    add_common(train, true);
    auto* sample = app.add_subcommand("sample", "integrate the flow from latent draws");
    add_common(sample, true);
    auto* solve = app.add_subcommand("solve", "run a restoration experiment");
    add_common(solve, true);
    auto* gridsearch = app.add_subcommand("gridsearch", "sweep alpha and step count");
    add_common(gridsearch, true);
    auto* eval = app.add_subcommand("eval", "metrics between two images or point sets");
    eval->add_option("a", eval_a, "first file (.pgm/.ppm/.csv)")->required();
    eval->add_option("b", eval_b, "second file")->required();
    eval->add_option("--peak", eval_peak, "PSNR peak / SSIM data range");
    auto* check = app.add_subcommand("check", "run the built-in property suite");
    (void)check;

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(opts);
        if (sample->parsed()) return cmd_sample(opts);
        if (solve->parsed()) return cmd_solve(opts);
        if (gridsearch->parsed()) return cmd_gridsearch(opts);
        if (eval->parsed()) return cmd_eval(eval_a, eval_b, eval_peak);
        if (check->parsed()) return cmd_check();
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const pnpflow::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const pnpflow::runtime_failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
