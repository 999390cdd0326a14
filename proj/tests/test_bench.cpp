#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pnpflow/experiment.hpp"

using namespace pnpflow;

namespace {

Config toy_denoise_config(const std::string& out_dir) {
    Config cfg = Config::parse_text(
        "[experiment]\n"
        "task = denoise\n"
        "seed = 3\n"
        "items = 4\n"
        "[target]\n"
        "kind = gaussian\n"
        "dim = 2\n"
        "mean = 7,7\n"
        "scale = 0.5\n"
        "[operator]\n"
        "noise = gaussian\n"
        "sigma = 1.5\n"
        "[model]\n"
        "kind = gauss_ot\n"
        "mean = 7,7\n"
        "scale = 0.5\n"
        "[solve]\n"
        "schedule = uniform\n"
        "steps = 50\n"
        "alpha = 0.5\n"
        "K = 3\n"
        "weighted = true\n");
    cfg.set("experiment.out", out_dir);
    return cfg;
}

std::filesystem::path temp_dir(const char* name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("experiment config parsing and validation", "[experiment]") {
    const ExperimentConfig ec =
        ExperimentConfig::from_config(toy_denoise_config("unused"));
    REQUIRE(ec.task == "denoise");
    REQUIRE(ec.n_items == 4);
    REQUIRE(ec.solve.K == 3);
    REQUIRE(ec.sigma_weighted);
    REQUIRE(ec.item_shape() == std::vector<std::size_t>{2});

    Config bad = toy_denoise_config("unused");
    bad.set("experiment.task", "teleport");
    REQUIRE_THROWS_AS(ExperimentConfig::from_config(bad), config_error);

    Config badbox = toy_denoise_config("unused");
    badbox.set("operator.box", "1,2,3");
    REQUIRE_THROWS_AS(ExperimentConfig::from_config(badbox), config_error);

    Config badsched = toy_denoise_config("unused");
    badsched.set("solve.schedule", "sometimes");
    REQUIRE_THROWS_AS(ExperimentConfig::from_config(badsched), config_error);
}

TEST_CASE("make_operator builds the right degradations", "[experiment]") {
    Config cfg = toy_denoise_config("unused");
    cfg.set("target.kind", "gaussian");
    ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    REQUIRE(ec.make_operator().kind() == DegradationOp::Kind::identity);

    ec.task = "inpaint_box";
    ec.box = std::vector<std::size_t>{0, 0, 1, 1};
    // 1-D targets have no rows/columns to mask
    REQUIRE_THROWS_AS(ec.make_operator(), error);
}

TEST_CASE("denoising beats the degraded baseline on the toy task", "[experiment]") {
    const auto out = temp_dir("pnpflow_bench_run");
    ExperimentConfig ec = ExperimentConfig::from_config(toy_denoise_config(out.string()));
    ec.write_artifacts = false;
    const Manifest man = run_experiment(ec);
    REQUIRE(man.items.size() == 4);
    REQUIRE(man.item_errors.empty());
    REQUIRE(man.aggregate.mse < man.aggregate_degraded.mse);
    REQUIRE(man.aggregate.psnr > man.aggregate_degraded.psnr);
}

TEST_CASE("manifests are identical across reruns and locations", "[experiment]") {
    const auto out_a = temp_dir("pnpflow_bench_a");
    const auto out_b = temp_dir("pnpflow_bench_b");
    ExperimentConfig a = ExperimentConfig::from_config(toy_denoise_config(out_a.string()));
    ExperimentConfig b = ExperimentConfig::from_config(toy_denoise_config(out_b.string()));
    const Manifest ma = run_experiment(a);
    const Manifest mb = run_experiment(b);
    REQUIRE(ma.to_json() == mb.to_json());

    // Seed participates in the stream, so metrics move with it.
    Config other = toy_denoise_config(out_b.string());
    other.set("experiment.seed", "4");
    ExperimentConfig c = ExperimentConfig::from_config(other);
    c.write_artifacts = false;
    const Manifest mc = run_experiment(c);
    REQUIRE(mc.aggregate.mse != ma.aggregate.mse);

    // On-disk manifest matches the returned one byte for byte.
    std::ifstream in(out_a / "manifest.json", std::ios::binary);
    std::string disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(disk == ma.to_json());

    // Timing is kept out of the manifest entirely.
    REQUIRE(std::filesystem::exists(out_a / "timing.json"));
    REQUIRE(ma.to_json().find("wall_clock") == std::string::npos);

    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
}

TEST_CASE("manifest json carries the run identity", "[experiment]") {
    const auto out = temp_dir("pnpflow_bench_json");
    ExperimentConfig ec = ExperimentConfig::from_config(toy_denoise_config(out.string()));
    ec.write_artifacts = false;
    const Manifest man = run_experiment(ec);
    const auto j = nlohmann::json::parse(man.to_json());
    REQUIRE(j["format"] == "pnpflow-manifest-1");
    REQUIRE(j["config_hash"].get<std::string>().size() == 16);
    REQUIRE(j["seed"] == 3);
    REQUIRE(j["items"].size() == 4);
    REQUIRE(j["items"][0].contains("restored"));
    REQUIRE(j["items"][0].contains("degraded"));
    REQUIRE(j["aggregate"].contains("psnr"));
    REQUIRE(j["config"].get<std::string>().find("solve.alpha = 0.5") != std::string::npos);
    // ssim is undefined for 2-D points and must serialize as null, not NaN
    REQUIRE(j["aggregate"]["ssim"].is_null());
    std::filesystem::remove_all(out);
}

TEST_CASE("item failures are recorded and the run continues", "[experiment]") {
    Config cfg = toy_denoise_config("unused");
    cfg.set("solve.gamma", "1e9");
    cfg.set("solve.K", "1");
    ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    ec.write_artifacts = false;
    const Manifest man = run_experiment(ec);
    REQUIRE(man.items.empty());
    REQUIRE(man.item_errors.size() == 4);
    REQUIRE(man.item_errors.front().find("0:") == 0);
}

TEST_CASE("degraded psnr pins the metric convention on images", "[experiment]") {
    const auto data_dir = temp_dir("pnpflow_bench_data");
    {
        RngState rng(99);
        Grid img({100, 100});
        for (double& v : img) v = 2.0 * rng.next_uniform() - 1.0;
        write_netpbm((data_dir / "clean.pgm").string(), img);
    }
    Config cfg = Config::parse_text(
        "[experiment]\n"
        "task = denoise\n"
        "seed = 5\n"
        "items = 1\n"
        "[target]\n"
        "kind = dataset\n"
        "[operator]\n"
        "noise = gaussian\n"
        "sigma = 0.2\n"
        "[model]\n"
        "kind = gauss_indep\n"
        "mean = 0\n"
        "scale = 1.0\n"
        "[solve]\n"
        "steps = 10\n"
        "K = 1\n");
    cfg.set("target.dir", data_dir.string());
    ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    ec.write_artifacts = false;
    const Manifest man = run_experiment(ec);
    REQUIRE(man.aggregate_degraded.psnr == Catch::Approx(20.0).margin(0.25));
    REQUIRE(std::isfinite(man.aggregate_degraded.ssim));
    std::filesystem::remove_all(data_dir);
}

TEST_CASE("dataset experiments write image artifacts", "[experiment]") {
    const auto data_dir = temp_dir("pnpflow_bench_imgs");
    const auto out_dir = temp_dir("pnpflow_bench_imgout");
    {
        RngState rng(7);
        Grid img({24, 24});
        for (double& v : img) v = 2.0 * rng.next_uniform() - 1.0;
        write_netpbm((data_dir / "a.pgm").string(), img);
    }
    Config cfg = Config::parse_text(
        "[experiment]\n"
        "task = denoise\n"
        "items = 1\n"
        "[target]\n"
        "kind = dataset\n"
        "[operator]\n"
        "sigma = 0.2\n"
        "[model]\n"
        "kind = gauss_indep\n"
        "mean = 0\n"
        "scale = 1.0\n"
        "[solve]\n"
        "steps = 10\n"
        "K = 1\n");
    cfg.set("target.dir", data_dir.string());
    cfg.set("experiment.out", out_dir.string());
    const Manifest man = run_experiment(ExperimentConfig::from_config(cfg));
    REQUIRE(std::filesystem::exists(out_dir / "item_000_restored.pgm"));
    bool listed = false;
    for (const auto& a : man.artifacts) listed = listed || a == "item_000_restored.pgm";
    REQUIRE(listed);
    std::filesystem::remove_all(data_dir);
    std::filesystem::remove_all(out_dir);
}

TEST_CASE("grid search scores every cell and honors ties", "[gridsearch]") {
    // gamma = 1 on a noise-free identity task saturates the psnr cap once the
    // geometric schedule hits t = 1 exactly, so both step counts tie at 100 dB
    // and the tie has to break toward fewer steps.
    Config cfg = Config::parse_text(
        "[experiment]\n"
        "task = denoise\n"
        "seed = 2\n"
        "items = 1\n"
        "[target]\n"
        "kind = gaussian\n"
        "dim = 2\n"
        "mean = 7,7\n"
        "scale = 0.5\n"
        "[operator]\n"
        "sigma = 0\n"
        "[model]\n"
        "kind = gauss_ot\n"
        "scale = 0.5\n"
        "[solve]\n"
        "schedule = geometric\n"
        "q = 0.9\n"
        "steps = 400\n"
        "K = 1\n"
        "gamma = 1.0\n");
    ExperimentConfig base = ExperimentConfig::from_config(cfg);
    base.write_artifacts = false;

    const GridSearchResult res = grid_search(base, {0.5}, {450, 400}, 1);
    REQUIRE(res.table.size() == 2);
    for (const auto& cell : res.table) {
        REQUIRE(cell.score == 100.0);
        REQUIRE(cell.error.empty());
    }
    REQUIRE(res.best_cell.n_steps == 400);
    REQUIRE(res.best_cell.score == 100.0);

    // The selected cell's score must equal its table entry.
    bool found = false;
    for (const auto& cell : res.table) {
        if (cell.n_steps == res.best_cell.n_steps && cell.alpha == res.best_cell.alpha) {
            REQUIRE(cell.score == res.best_cell.score);
            found = true;
        }
    }
    REQUIRE(found);
}

TEST_CASE("grid search skips failing cells", "[gridsearch]") {
    ExperimentConfig base = ExperimentConfig::from_config(toy_denoise_config("unused"));
    base.write_artifacts = false;
    base.n_items = 1;
    base.solve.schedule = Schedule::uniform(20);

    // alpha = 2 violates the stepsize domain and can only fail.
    const GridSearchResult res = grid_search(base, {2.0, 0.5}, {20}, 1);
    REQUIRE(res.table.size() == 2);
    REQUIRE_FALSE(std::isfinite(res.table[0].score));
    REQUIRE_FALSE(res.table[0].error.empty());
    REQUIRE(std::isfinite(res.table[1].score));
    REQUIRE(res.best_cell.alpha == 0.5);

    REQUIRE_THROWS_AS(grid_search(base, {}, {20}, 1), validation_error);
    REQUIRE_THROWS_AS(grid_search(base, {0.5}, {20}, 0), validation_error);
}

TEST_CASE("singleton grid search returns the base configuration", "[gridsearch]") {
    ExperimentConfig base = ExperimentConfig::from_config(toy_denoise_config("unused"));
    base.write_artifacts = false;
    const GridSearchResult res = grid_search(base, {0.5}, {50}, 2);
    REQUIRE(res.table.size() == 1);
    REQUIRE(res.best_cell.alpha == 0.5);
    REQUIRE(res.best_cell.n_steps == 50);
    REQUIRE(res.best_cell.score == res.table[0].score);
    REQUIRE(res.best.solve.alpha == 0.5);
    REQUIRE(res.best.solve.schedule.steps() == 50);
}

TEST_CASE("score tables serialize to csv", "[gridsearch]") {
    const auto path = std::filesystem::temp_directory_path() / "pnpflow_scores.csv";
    std::vector<GridCell> table(3);
    table[1].alpha = 0.5;
    table[1].n_steps = 100;
    table[1].score = 21.5;
    table[2].error = "diverged";
    write_score_table_csv(path.string(), table);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "alpha,steps,psnr,error");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    REQUIRE(rows == 3);
    std::filesystem::remove(path);
}
