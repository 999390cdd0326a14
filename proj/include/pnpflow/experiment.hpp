#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <sys/resource.h>

#include <json.hpp>

#include "pnpflow/config.hpp"
#include "pnpflow/errors.hpp"
#include "pnpflow/fidelity.hpp"
#include "pnpflow/fields.hpp"
#include "pnpflow/io.hpp"
#include "pnpflow/metrics.hpp"
#include "pnpflow/operators.hpp"
#include "pnpflow/solver.hpp"
#include "pnpflow/train.hpp"

namespace pnpflow {

namespace detail {

inline std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        const std::string t = trim(cell);
        if (t.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (end == t.c_str() || *end != '\0') {
            throw config_error(std::string(what) + ": bad number '" + t + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw config_error(std::string(what) + ": empty list");
    return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(s, what)) {
        if (v < 0.0 || v != std::floor(v)) {
            throw config_error(std::string(what) + ": expected nonnegative integers");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

}  // namespace detail

// Everything a run needs, resolved from the raw key-value config. The raw
// config is retained verbatim: its canonical form is what gets hashed and
// embedded in the manifest.
struct ExperimentConfig {
    Config raw;

    std::string task = "denoise";
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::size_t n_items = 8;
    double peak = 2.0;
    bool write_artifacts = true;

    // target / test data
    bool target_is_dataset = false;
    TargetSpec target = TargetSpec::isotropic_gaussian(Grid::vec({7.0, 7.0}), 0.5);
    std::vector<Grid> dataset;

    // degradation
    NoiseModel noise = NoiseModel::gaussian(0.0);
    std::size_t kernel_size = 5;
    double sigma_b = 1.0;
    std::size_t factor = 2;
    double mask_rate = 0.7;
    std::uint64_t mask_seed = 1;
    std::optional<std::vector<std::size_t>> box;  // row0,col0,height,width
    std::size_t box_size = 0;                     // centered square when box absent

    // prior model
    std::string model_kind = "gauss_indep";  // gauss_indep | gauss_ot | gmm | mlp
    std::optional<std::string> model_params_path;
    std::optional<std::vector<double>> model_mean;
    double model_scale = 1.0;
    std::vector<MixtureComponent> model_components;

    // solver
    SolveConfig solve;
    bool sigma_weighted = false;
    bool laplace_fidelity = false;
    std::string init_mode = "backprojection";  // backprojection | zero
    double kernel_lr = 1e-2;                   // blind task

    static ExperimentConfig from_config(const Config& cfg) {
        ExperimentConfig e;
        e.raw = cfg;
        e.task = cfg.get_string("experiment.task", "denoise");
        const std::vector<std::string> tasks{"denoise",      "deblur",         "superres",
                                             "inpaint_box",  "inpaint_random", "blind_deblur"};
        if (std::find(tasks.begin(), tasks.end(), e.task) == tasks.end()) {
            throw config_error("experiment.task: unknown task " + e.task);
        }
        e.out_dir = cfg.get_string("experiment.out", "out");
        e.seed = cfg.get_u64("experiment.seed", 0);
        e.n_items = static_cast<std::size_t>(cfg.get_int("experiment.items", 8));
        if (e.n_items < 1) throw config_error("experiment.items: must be >= 1");
        e.peak = cfg.get_double("experiment.peak", 2.0);

        const std::string tkind = cfg.get_string("target.kind", "gaussian");
        if (tkind == "gaussian") {
            const std::size_t dim = static_cast<std::size_t>(cfg.get_int("target.dim", 2));
            std::vector<double> mean(dim, 0.0);
            if (cfg.has("target.mean")) {
                mean = detail::parse_double_list(cfg.get_string("target.mean"), "target.mean");
                if (mean.size() == 1) mean.assign(dim, mean[0]);
                if (mean.size() != dim) throw config_error("target.mean: length != target.dim");
            }
            e.target = TargetSpec::isotropic_gaussian(Grid({dim}, std::move(mean)),
                                                      cfg.get_double("target.scale", 0.5));
        } else if (tkind == "dataset") {
            const std::string dir = cfg.get_string("target.dir");
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(dir)) {
                const auto ext = entry.path().extension();
                if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw config_error("target.dir: no .pgm/.ppm files in " + dir);
            for (const auto& f : files) e.dataset.push_back(read_netpbm(f.string()));
            e.target_is_dataset = true;
        } else {
            throw config_error("target.kind: expected gaussian or dataset");
        }

        const std::string nkind = cfg.get_string("operator.noise", "gaussian");
        if (nkind == "gaussian") {
            e.noise = NoiseModel::gaussian(cfg.get_double("operator.sigma", 0.0));
        } else if (nkind == "laplace") {
            e.noise = NoiseModel::laplace(cfg.get_double("operator.b", 0.1));
        } else {
            throw config_error("operator.noise: expected gaussian or laplace");
        }
        e.kernel_size = static_cast<std::size_t>(cfg.get_int("operator.kernel_size", 5));
        e.sigma_b = cfg.get_double("operator.sigma_b", 1.0);
        e.factor = static_cast<std::size_t>(cfg.get_int("operator.factor", 2));
        e.mask_rate = cfg.get_double("operator.rate", 0.7);
        e.mask_seed = cfg.get_u64("operator.mask_seed", 1);
        if (cfg.has("operator.box")) {
            const auto b = detail::parse_size_list(cfg.get_string("operator.box"), "operator.box");
            if (b.size() != 4) throw config_error("operator.box: expected row0,col0,height,width");
            e.box = b;
        }
        e.box_size = static_cast<std::size_t>(cfg.get_int("operator.size", 0));

        e.model_kind = cfg.get_string("model.kind", "gauss_indep");
        if (cfg.has("model.params")) e.model_params_path = cfg.get_string("model.params");
        if (cfg.has("model.mean")) {
            e.model_mean = detail::parse_double_list(cfg.get_string("model.mean"), "model.mean");
        }
        e.model_scale = cfg.get_double("model.scale", 1.0);
        if (cfg.has("model.components")) {
            // semicolon-separated components: weight,mean...,scale
            std::istringstream in(cfg.get_string("model.components"));
            std::string part;
            while (std::getline(in, part, ';')) {
                const auto vals = detail::parse_double_list(part, "model.components");
                if (vals.size() < 3) {
                    throw config_error("model.components: each needs weight,mean...,scale");
                }
                MixtureComponent c;
                c.weight = vals.front();
                c.scale = vals.back();
                c.mean = Grid({vals.size() - 2},
                              std::vector<double>(vals.begin() + 1, vals.end() - 1));
                e.model_components.push_back(std::move(c));
            }
        }

        const std::string skind = cfg.get_string("solve.schedule", "uniform");
        const std::size_t steps = static_cast<std::size_t>(cfg.get_int("solve.steps", 100));
        if (skind == "uniform") {
            e.solve.schedule = Schedule::uniform(steps);
        } else if (skind == "geometric") {
            e.solve.schedule = Schedule::geometric(cfg.get_double("solve.q", 0.9), steps);
        } else {
            throw config_error("solve.schedule: expected uniform or geometric");
        }
        e.solve.alpha = cfg.get_double("solve.alpha", 0.5);
        e.solve.K = static_cast<std::size_t>(cfg.get_int("solve.K", 5));
        e.solve.seed = cfg.get_u64("solve.seed", e.seed);
        if (cfg.has("solve.gamma")) e.solve.gamma_override = cfg.get_double("solve.gamma");
        e.solve.clip_noise = cfg.get_bool("solve.clip_noise", false);
        e.solve.clip_threshold = cfg.get_double("solve.clip_threshold", 6.0);
        e.solve.validate();
        e.sigma_weighted = cfg.get_bool("solve.weighted", false);
        e.laplace_fidelity = cfg.get_string("solve.fidelity", "gaussian") == "laplace";
        e.init_mode = cfg.get_string("solve.init", "backprojection");
        if (e.init_mode != "backprojection" && e.init_mode != "zero") {
            throw config_error("solve.init: expected backprojection or zero");
        }
        e.kernel_lr = cfg.get_double("solve.kernel_lr", 1e-2);
        return e;
    }

    Grid clean_item(std::size_t index, RngState& rng) const {
        if (target_is_dataset) return dataset[index % dataset.size()];
        return draw_target(target, rng);
    }

    std::vector<std::size_t> item_shape() const {
        if (target_is_dataset) return dataset.front().shape();
        return {target.dim()};
    }

    DegradationOp make_operator() const {
        const auto shape = item_shape();
        if (task == "denoise") return DegradationOp::identity(shape);
        if (task == "deblur" || task == "blind_deblur") {
            return DegradationOp::conv_blur(shape, gaussian_kernel(kernel_size, sigma_b));
        }
        if (task == "superres") return DegradationOp::downsample(shape, factor);
        if (task == "inpaint_random") return DegradationOp::mask_random(shape, mask_rate, mask_seed);
        if (task == "inpaint_box") {
            const std::size_t H = shape[shape.size() - 2], W = shape[shape.size() - 1];
            if (box) return DegradationOp::mask_box(shape, (*box)[0], (*box)[1], (*box)[2], (*box)[3]);
            const std::size_t s = box_size ? box_size : H / 4;
            return DegradationOp::mask_box(shape, (H - s) / 2, (W - s) / 2, s, s);
        }
        throw config_error("make_operator: unhandled task " + task);
    }

    std::shared_ptr<VelocityField> make_field() const {
        const std::size_t n = Grid(item_shape()).size();
        Grid mean(item_shape());
        if (model_mean) {
            if (model_mean->size() == 1) {
                mean = Grid(item_shape(), std::vector<double>(n, (*model_mean)[0]));
            } else if (model_mean->size() == n) {
                mean = Grid(item_shape(), *model_mean);
            } else {
                throw config_error("model.mean: length does not match the item size");
            }
        } else if (!target_is_dataset && target.kind == TargetSpec::Kind::isotropic_gaussian) {
            mean = target.mean;
        }
        if (model_kind == "gauss_indep") {
            return std::make_shared<GaussIndepField>(std::move(mean), model_scale);
        }
        if (model_kind == "gauss_ot") {
            return std::make_shared<GaussOtField>(std::move(mean), model_scale);
        }
        if (model_kind == "gmm") {
            if (model_components.empty()) throw config_error("model.components: required for gmm");
            std::vector<GmmIndepField::Component> comps;
            for (const auto& c : model_components) {
                comps.push_back({c.weight, c.mean, c.scale});
            }
            return std::make_shared<GmmIndepField>(std::move(comps));
        }
        if (model_kind == "mlp") {
            if (!model_params_path) throw config_error("model.params: required for mlp");
            return std::make_shared<MlpField>(load_mlp_params(*model_params_path));
        }
        throw config_error("model.kind: unknown kind " + model_kind);
    }
};

struct MetricsRecord {
    double mse = std::numeric_limits<double>::quiet_NaN();
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
};

struct ItemRecord {
    std::size_t index = 0;
    MetricsRecord restored;
    MetricsRecord degraded;
};

struct Manifest {
    std::string config_hash;
    std::string config_text;
    std::uint64_t seed = 0;
    std::string task;
    std::vector<ItemRecord> items;
    MetricsRecord aggregate;
    MetricsRecord aggregate_degraded;
    std::vector<std::string> artifacts;
    std::vector<std::string> item_errors;

    std::string to_json() const {
        using json = nlohmann::ordered_json;
        auto rec = [](const MetricsRecord& m) {
            json j;
            j["mse"] = m.mse;
            j["psnr"] = m.psnr;
            j["ssim"] = m.ssim;
            return j;
        };
        json j;
        j["format"] = "pnpflow-manifest-1";
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["task"] = task;
        json items_j = json::array();
        for (const auto& it : items) {
            json e;
            e["index"] = it.index;
            e["restored"] = rec(it.restored);
            e["degraded"] = rec(it.degraded);
            items_j.push_back(std::move(e));
        }
        j["items"] = std::move(items_j);
        j["aggregate"] = rec(aggregate);
        j["aggregate_degraded"] = rec(aggregate_degraded);
        j["artifacts"] = artifacts;
        j["errors"] = item_errors;
        j["config"] = config_text;
        return j.dump(2) + "\n";
    }
};

namespace detail {

inline MetricsRecord score_item(const Grid& restored, const Grid& clean, double peak) {
    MetricsRecord m;
    m.mse = mse(restored, clean);
    m.psnr = psnr(restored, clean, peak);
    if (clean.rank() >= 2 && clean.shape()[clean.rank() - 2] >= 11 &&
        clean.shape()[clean.rank() - 1] >= 11) {
        m.ssim = ssim(restored, clean, peak);
    }
    return m;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline Grid clamp_unit(Grid g) {
    for (double& v : g) v = std::max(-1.0, std::min(1.0, v));
    return g;
}

inline std::uint64_t item_seed(std::uint64_t base, std::size_t index) {
    return mix64(base + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(index) + 1));
}

}  // namespace detail

// Degrade, solve, and score every test item; failures are recorded and the
// run continues. Wall-clock and peak RSS go to a separate timing file so the
// manifest itself stays a pure function of (config, seed).
inline Manifest run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;

    Manifest man;
    {
        // The output location is not part of a run's identity: the same
        // config written elsewhere must produce a byte-identical manifest.
        Config hashed = cfg.raw;
        hashed.erase("experiment.out");
        man.config_hash = config_hash(hashed);
        man.config_text = hashed.serialize();
    }
    man.seed = cfg.seed;
    man.task = cfg.task;

    if (cfg.write_artifacts) fs::create_directories(cfg.out_dir);

    const DegradationOp H = cfg.make_operator();
    const auto field = cfg.make_field();
    const std::size_t n = Grid(cfg.item_shape()).size();
    const LatentSpec latent = LatentSpec::isotropic_gaussian(n);

    std::vector<double> agg_mse, agg_psnr, agg_ssim;
    std::vector<double> deg_mse, deg_psnr, deg_ssim;
    std::vector<Grid> clean_pts, degraded_pts, restored_pts;
    const RngState base(cfg.seed);

    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        try {
            RngState item_rng = base.fork(i);
            RngState clean_rng = item_rng.fork(0);
            RngState noise_rng = item_rng.fork(1);
            const Grid clean = cfg.clean_item(i, clean_rng);
            const Grid y = degrade(clean, H, cfg.noise, noise_rng);

            SolveConfig solve = cfg.solve;
            solve.seed = detail::item_seed(cfg.solve.seed, i);
            if (!solve.x0) {
                solve.x0 = cfg.init_mode == "backprojection" ? H.adjoint(y)
                                                             : Grid(cfg.item_shape());
            }

            Grid restored(cfg.item_shape());
            if (cfg.task == "blind_deblur") {
                RngState solve_rng = item_rng.fork(2);
                auto res = blind_deblur_solve(y, *field, latent, solve, cfg.kernel_size,
                                              cfg.kernel_lr, solve_rng);
                restored = std::move(res.x);
            } else {
                Fidelity fid =
                    cfg.laplace_fidelity
                        ? Fidelity::laplace(H, y)
                        : (cfg.sigma_weighted
                               ? Fidelity::gaussian_weighted(H, y, cfg.noise.sigma)
                               : Fidelity::gaussian(H, y));
                auto [x, trace] = pnp_flow_solve(solve, fid, *field, latent, &clean, cfg.peak);
                restored = std::move(x);
                if (cfg.write_artifacts && i == 0) {
                    write_trace_csv((fs::path(cfg.out_dir) / "trace_000.csv").string(), trace);
                    man.artifacts.push_back("trace_000.csv");
                }
            }

            ItemRecord rec;
            rec.index = i;
            rec.restored = detail::score_item(restored, clean, cfg.peak);
            if (y.same_shape(clean)) rec.degraded = detail::score_item(y, clean, cfg.peak);
            man.items.push_back(rec);

            agg_mse.push_back(rec.restored.mse);
            agg_psnr.push_back(rec.restored.psnr);
            if (!std::isnan(rec.restored.ssim)) agg_ssim.push_back(rec.restored.ssim);
            if (!std::isnan(rec.degraded.mse)) {
                deg_mse.push_back(rec.degraded.mse);
                deg_psnr.push_back(rec.degraded.psnr);
                if (!std::isnan(rec.degraded.ssim)) deg_ssim.push_back(rec.degraded.ssim);
            }

            if (cfg.write_artifacts) {
                if (cfg.target_is_dataset) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "item_%03zu_restored.pgm", i);
                    write_netpbm((fs::path(cfg.out_dir) / name).string(),
                                 detail::clamp_unit(restored));
                    man.artifacts.push_back(name);
                } else {
                    clean_pts.push_back(clean);
                    if (y.same_shape(clean)) degraded_pts.push_back(y);
                    restored_pts.push_back(restored);
                }
            }
        } catch (const error& e) {
            man.item_errors.push_back(std::to_string(i) + ": " + e.what());
        }
    }

    if (cfg.write_artifacts && !restored_pts.empty()) {
        for (const auto& [name, pts] :
             {std::pair<const char*, const std::vector<Grid>*>{"clean.csv", &clean_pts},
              {"degraded.csv", &degraded_pts},
              {"restored.csv", &restored_pts}}) {
            if (pts->empty()) continue;
            write_points_csv((fs::path(cfg.out_dir) / name).string(), *pts);
            man.artifacts.push_back(name);
        }
    }

    man.aggregate.mse = detail::mean_of(agg_mse);
    man.aggregate.psnr = detail::mean_of(agg_psnr);
    man.aggregate.ssim = detail::mean_of(agg_ssim);
    man.aggregate_degraded.mse = detail::mean_of(deg_mse);
    man.aggregate_degraded.psnr = detail::mean_of(deg_psnr);
    man.aggregate_degraded.ssim = detail::mean_of(deg_ssim);

    if (cfg.write_artifacts) {
        const std::string mpath = (std::filesystem::path(cfg.out_dir) / "manifest.json").string();
        std::ofstream mout(mpath, std::ios::binary);
        if (!mout) throw io_error("run_experiment: cannot open " + mpath);
        mout << man.to_json();

        struct rusage usage{};
        getrusage(RUSAGE_SELF, &usage);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        nlohmann::ordered_json timing;
        timing["wall_clock_s"] = wall;
        timing["peak_rss_kb"] = static_cast<std::int64_t>(usage.ru_maxrss);
        std::ofstream tout((std::filesystem::path(cfg.out_dir) / "timing.json").string());
        tout << timing.dump(2) << "\n";
    }
    return man;
}

struct GridCell {
    double alpha = 0.0;
    std::size_t n_steps = 0;
    double score = -std::numeric_limits<double>::infinity();  // aggregate PSNR
    std::string error;
};

struct GridSearchResult {
    ExperimentConfig best;
    GridCell best_cell;
    std::vector<GridCell> table;
};

// Exhaustive (alpha, N) sweep scored by aggregate PSNR on the validation
// items. Ties break toward smaller N, then smaller alpha.
inline GridSearchResult grid_search(const ExperimentConfig& base,
                                    const std::vector<double>& alpha_grid,
                                    const std::vector<std::size_t>& n_grid,
                                    std::size_t validation_items) {
    if (alpha_grid.empty() || n_grid.empty()) {
        throw validation_error("grid_search: empty grid");
    }
    if (validation_items < 1) throw validation_error("grid_search: empty validation set");

    GridSearchResult result;
    result.best = base;
    bool have_best = false;
    for (double alpha : alpha_grid) {
        for (std::size_t n : n_grid) {
            ExperimentConfig cfg = base;
            cfg.write_artifacts = false;
            cfg.n_items = validation_items;
            cfg.solve.alpha = alpha;
            cfg.solve.schedule = base.solve.schedule.kind == Schedule::Kind::geometric
                                     ? Schedule::geometric(base.solve.schedule.q, n)
                                     : Schedule::uniform(n);
            cfg.raw.set("solve.alpha", detail::fmt_g17(alpha));
            cfg.raw.set("solve.steps", std::to_string(n));
            GridCell cell;
            cell.alpha = alpha;
            cell.n_steps = n;
            try {
                const Manifest man = run_experiment(cfg);
                if (!man.item_errors.empty()) {
                    cell.error = man.item_errors.front();
                } else {
                    cell.score = man.aggregate.psnr;
                }
            } catch (const error& e) {
                cell.error = e.what();
            }
            const bool better =
                !have_best || cell.score > result.best_cell.score ||
                (cell.score == result.best_cell.score &&
                 (n < result.best_cell.n_steps ||
                  (n == result.best_cell.n_steps && alpha < result.best_cell.alpha)));
            if (std::isfinite(cell.score) && better) {
                result.best = cfg;
                result.best.write_artifacts = base.write_artifacts;
                result.best.n_items = base.n_items;
                result.best_cell = cell;
                have_best = true;
            }
            result.table.push_back(std::move(cell));
        }
    }
    return result;
}

inline void write_score_table_csv(const std::string& path, const std::vector<GridCell>& table) {
    std::ofstream out(path);
    if (!out) throw io_error("write_score_table_csv: cannot open " + path);
    out << "alpha,steps,psnr,error\n";
    for (const auto& c : table) {
        out << detail::fmt_g17(c.alpha) << "," << c.n_steps << ","
            << detail::fmt_g17(c.score) << "," << c.error << "\n";
    }
    if (!out) throw io_error("write_score_table_csv: write failed for " + path);
}

}  // namespace pnpflow
