#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "losmap/config_file.hpp"
#include "losmap/harness.hpp"
#include "losmap/layout_io.hpp"

namespace {

using namespace losmap;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct ModelFlags {
    double radius = 150.0;   // m
    double lambda = 0.0015;  // m^-2
    double lmax = 20.0;      // m
    int nodes_l = 32;
    int nodes_theta = 64;

    ScenarioParams params() const {
        ScenarioParams p;
        p.radius = radius;
        p.lambda = lambda;
        p.length_dist = DistributionSpec::uniform(0.0, lmax);
        p.orientation_dist = DistributionSpec::uniform(0.0, kPi);
        p.validate();
        return p;
    }
    QuadratureSpec quadrature() const {
        QuadratureSpec q{nodes_l, nodes_theta};
        q.validate();
        return q;
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--radius-m", flags.radius, "Cell radius in meters");
    cmd->add_option("--lambda-per-m2", flags.lambda, "Blockage density in obstacles per m^2");
    cmd->add_option("--lmax-m", flags.lmax,
                    "Obstacle lengths are uniform on (0, lmax-m) meters");
    cmd->add_option("--quad-nodes-l", flags.nodes_l, "Quadrature nodes in the length axis");
    cmd->add_option("--quad-nodes-theta", flags.nodes_theta,
                    "Quadrature nodes in the orientation axis");
}

struct EstimatorFlags {
    std::string name;
    int k = 3;
    double sigma = 1.8;  // m
    long long r_max = -1;

    EstimatorConfig config(const QuadratureSpec& quad) const {
        const auto kind = estimator_from_name(name);
        if (!kind) {
            throw std::invalid_argument(
                "unknown estimator '" + name +
                "' (expected map, map-bonferroni, kn-map, knn, kns, pg, nb)");
        }
        EstimatorConfig cfg;
        cfg.kind = *kind;
        cfg.k = k;
        cfg.sigma = sigma;
        if (r_max > 0) cfg.r_max = static_cast<std::size_t>(r_max);
        cfg.quadrature = quad;
        cfg.validate();
        return cfg;
    }
};

void add_estimator_flags(CLI::App* cmd, EstimatorFlags& flags, bool required) {
    auto* opt = cmd->add_option("--estimator", flags.name,
                                "Estimator: map, map-bonferroni, kn-map, knn, kns, pg, nb");
    if (required) opt->required();
    cmd->add_option("--k", flags.k, "Neighbor count for kn-map/knn/kns");
    cmd->add_option("--sigma-m", flags.sigma, "Gaussian window width in meters (pg)");
    cmd->add_option("--r-max", flags.r_max, "Bonferroni order cap (map-bonferroni)");
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot write '" + path + "'");
    return file;
}

void write_prediction_row(std::ostream& out, Point2D y, const Prediction& pred, double time_us) {
    char buf[160];
    if (pred.posterior) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,%.9g,%.3f\n", y.x, y.y, pred.label,
                      *pred.posterior, time_us);
    } else {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,,%.3f\n", y.x, y.y, pred.label, time_us);
    }
    out << buf;
}

int cmd_predict(const std::string& measurements_path, const std::string& queries_path,
                const std::vector<double>& at, const ModelFlags& model,
                const EstimatorFlags& estimator, const std::string& out_path) {
    const ScenarioParams params = model.params();
    const EstimatorConfig cfg = estimator.config(model.quadrature());
    const std::vector<Measurement> data = load_measurements(measurements_path);

    std::vector<Point2D> queries;
    if (!queries_path.empty()) queries = load_points(queries_path);
    if (!at.empty()) queries.push_back({at[0], at[1]});
    if (queries.empty()) {
        throw std::invalid_argument("predict: provide --queries FILE or --at X,Y");
    }

    std::ofstream file;
    std::ostream& out = open_output(file, out_path);
    out << "x,y,label,posterior,time_us\n";
    for (const Point2D& y : queries) {
        const auto t0 = std::chrono::steady_clock::now();
        const Prediction pred = predict_one(cfg, data, y, params);
        const double us =
            std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
                .count();
        write_prediction_row(out, y, pred, us);
    }
    return kExitOk;
}

int cmd_map(const std::string& layout_path, std::optional<std::uint64_t> seed,
            const ModelFlags& model, const EstimatorFlags& estimator,
            const std::string& measurements_path, const std::string& raster_path,
            int raster_size, const std::string& legend_path) {
    const ScenarioParams params = model.params();
    Layout layout;
    if (!layout_path.empty()) {
        layout = load_layout(layout_path, params.radius);
    } else if (seed) {
        layout = sample_layout(params, *seed);
    } else {
        throw std::invalid_argument("map: provide --layout FILE or --seed N");
    }

    const RasterSpec spec{raster_size, raster_size};
    std::vector<std::uint8_t> pixels;
    std::string legend = "x,y,label,posterior\n";
    char buf[160];

    if (estimator.name.empty()) {
        // Ground-truth mode: ray-traced LOS per pixel.
        pixels = ground_truth_raster(layout, params.radius, spec);
        if (!legend_path.empty()) {
            for (int row = 0; row < spec.height; ++row) {
                for (int col = 0; col < spec.width; ++col) {
                    const Point2D p = raster_pixel_center(spec, params.radius, col, row);
                    if (p.norm_sq() >= params.radius * params.radius) continue;
                    const int label =
                        pixels[static_cast<std::size_t>(row) * spec.width + col] == kRasterLos;
                    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,\n", p.x, p.y, label);
                    legend += buf;
                }
            }
        }
    } else {
        const EstimatorConfig cfg = estimator.config(model.quadrature());
        std::vector<Measurement> data;
        if (!measurements_path.empty()) data = load_measurements(measurements_path);
        pixels.assign(static_cast<std::size_t>(spec.width) * spec.height, kRasterOutside);
        for (int row = 0; row < spec.height; ++row) {
            for (int col = 0; col < spec.width; ++col) {
                const Point2D p = raster_pixel_center(spec, params.radius, col, row);
                if (p.norm_sq() >= params.radius * params.radius) continue;
                const Prediction pred = predict_one(cfg, data, p, params);
                pixels[static_cast<std::size_t>(row) * spec.width + col] =
                    pred.label ? kRasterLos : kRasterNlos;
                if (!legend_path.empty()) {
                    if (pred.posterior) {
                        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,%.9g\n", p.x, p.y,
                                      pred.label, *pred.posterior);
                    } else {
                        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d,\n", p.x, p.y, pred.label);
                    }
                    legend += buf;
                }
            }
        }
    }

    write_pgm(raster_path, spec, pixels);
    if (!legend_path.empty()) {
        std::ofstream out(legend_path);
        if (!out) throw std::runtime_error("cannot write '" + legend_path + "'");
        out << legend;
    }
    return kExitOk;
}

int run_pairwise_error(const ExperimentFileConfig& cfg, std::ostream& out) {
    out << "d_m,theta0_rad,relative_error\n";
    char buf[96];
    for (double d : cfg.d_values) {
        for (double theta0 : cfg.theta0_values) {
            const double err =
                pairwise_independence_error(d, theta0, cfg.experiment.params, cfg.quadrature);
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", d, theta0, err);
            out << buf;
        }
    }
    return kExitOk;
}

int cmd_experiment(const std::string& config_path, const std::string& out_path,
                   const std::string& trial_log_path, bool want_sweep) {
    ExperimentFileConfig cfg = load_experiment_config(config_path);

    std::ofstream file;
    std::ostream& out = open_output(file, out_path);

    if (cfg.mode == ExperimentFileConfig::Mode::PairwiseError) {
        return run_pairwise_error(cfg, out);
    }

    if (want_sweep && cfg.experiment.sweep == SweepAxis::None) {
        throw std::invalid_argument(config_path + ": sweep command needs a sweep axis; use "
                                                  "`sweep = n` or `sweep = lambda`");
    }
    if (!want_sweep && cfg.experiment.sweep != SweepAxis::None) {
        throw std::invalid_argument(config_path +
                                    ": config declares a sweep; run it with the sweep command");
    }
    if (!cfg.layout_file.empty()) {
        cfg.experiment.fixed_layout = load_layout(cfg.layout_file, cfg.experiment.params.radius);
    }
    cfg.experiment.collect_trial_log = !trial_log_path.empty();

    const EvaluationReport report = run_experiment(cfg.experiment);
    out << report.to_csv(cfg.experiment.timing);
    if (!trial_log_path.empty()) {
        std::ofstream log(trial_log_path);
        if (!log) throw std::runtime_error("cannot write '" + trial_log_path + "'");
        log << report.trial_log_csv;
    }
    return kExitOk;
}

int cmd_fit(const std::string& layout_path, double radius, int obstacles_per_building,
            const std::string& out_path) {
    const LayoutFile file = load_layout_file(layout_path);
    const FittedParams fitted = fit_params(file, radius, obstacles_per_building);
    std::ofstream out_file;
    std::ostream& out = open_output(out_file, out_path);
    char buf[192];
    out << "lambda_hat_per_m2,l_max_hat_m,avg_perimeter_m,obstacle_count\n";
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%ld\n", fitted.lambda_hat, fitted.l_max_hat,
                  fitted.avg_perimeter, fitted.obstacle_count);
    out << buf;
    return kExitOk;
}

int cmd_layout_gen(const ManhattanGridSpec& spec, const std::string& out_path) {
    const LayoutFile file = generate_manhattan_layout(spec);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    out << "#polygons\n";
    char buf[64];
    for (const Building& b : file.buildings) {
        out << b.id;
        for (const Point2D& v : b.vertices) {
            std::snprintf(buf, sizeof(buf), ",%.12g,%.12g", v.x, v.y);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + out_path + "'");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "losmap: LOS/NLOS map estimation for a single-cell scenario with random blockages"};
    app.require_subcommand(1);

    // predict
    auto* predict = app.add_subcommand("predict", "Predict LOS/NLOS at query points");
    std::string measurements_path, queries_path, out_path;
    std::vector<double> at;
    ModelFlags predict_model;
    EstimatorFlags predict_estimator;
    predict->add_option("--measurements", measurements_path, "Measurement CSV (x,y,label)")
        ->required();
    predict->add_option("--queries", queries_path, "Query point CSV (x,y)");
    predict->add_option("--at", at, "Single query point: X Y (meters)")->expected(2);
    predict->add_option("--out", out_path, "Output CSV path (default stdout)");
    add_model_flags(predict, predict_model);
    add_estimator_flags(predict, predict_estimator, true);

    // map
    auto* map_cmd = app.add_subcommand("map", "Emit a coverage raster (PGM) and legend CSV");
    std::string map_layout, map_measurements, map_raster, map_legend;
    std::uint64_t map_seed = 0;
    bool map_seed_set = false;
    int raster_size = 128;
    ModelFlags map_model;
    EstimatorFlags map_estimator;
    map_cmd->add_option("--layout", map_layout, "Layout CSV to rasterize");
    map_cmd->add_option("--seed", map_seed, "Sample a layout with this seed instead")
        ->each([&](const std::string&) { map_seed_set = true; });
    map_cmd->add_option("--measurements", map_measurements, "Measurement CSV (estimator mode)");
    map_cmd->add_option("--raster", map_raster, "Output PGM path")->required();
    map_cmd->add_option("--raster-size", raster_size, "Raster width = height in pixels");
    map_cmd->add_option("--legend", map_legend, "Optional per-pixel prediction CSV");
    add_model_flags(map_cmd, map_model);
    add_estimator_flags(map_cmd, map_estimator, false);

    // experiment / sweep
    auto* experiment = app.add_subcommand("experiment", "Run a Monte-Carlo experiment");
    auto* sweep = app.add_subcommand("sweep", "Run an experiment sweep over N or lambda");
    std::string exp_config, exp_out, exp_log, sweep_config, sweep_out, sweep_log;
    experiment->add_option("--config", exp_config, "Experiment config file")->required();
    experiment->add_option("--out", exp_out, "Report CSV path (default stdout)");
    experiment->add_option("--trial-log", exp_log, "Optional per-trial CSV log");
    sweep->add_option("--config", sweep_config, "Experiment config file with a sweep axis")
        ->required();
    sweep->add_option("--out", sweep_out, "Report CSV path (default stdout)");
    sweep->add_option("--trial-log", sweep_log, "Optional per-trial CSV log");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit model parameters from a layout file");
    std::string fit_layout, fit_out;
    double fit_radius = 150.0;
    int fit_opb = 2;
    fit->add_option("--layout", fit_layout, "Layout CSV")->required();
    fit->add_option("--radius-m", fit_radius, "Cell radius in meters");
    fit->add_option("--obstacles-per-building", fit_opb, "Model obstacles per building");
    fit->add_option("--out", fit_out, "Output CSV path (default stdout)");

    // layout-gen
    auto* gen = app.add_subcommand("layout-gen", "Generate a Manhattan-grid stand-in layout");
    std::string gen_out;
    ManhattanGridSpec grid_spec;
    gen->add_option("--out", gen_out, "Output layout CSV path")->required();
    gen->add_option("--blocks-x", grid_spec.blocks_x, "Building columns");
    gen->add_option("--blocks-y", grid_spec.blocks_y, "Building rows");
    gen->add_option("--building-w-m", grid_spec.building_width, "Building width in meters");
    gen->add_option("--building-h-m", grid_spec.building_height, "Building height in meters");
    gen->add_option("--street-w-m", grid_spec.street_width, "Street width in meters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (predict->parsed()) {
            return cmd_predict(measurements_path, queries_path, at, predict_model,
                               predict_estimator, out_path);
        }
        if (map_cmd->parsed()) {
            return cmd_map(map_layout,
                           map_seed_set ? std::optional<std::uint64_t>(map_seed) : std::nullopt,
                           map_model, map_estimator, map_measurements, map_raster, raster_size,
                           map_legend);
        }
        if (experiment->parsed()) return cmd_experiment(exp_config, exp_out, exp_log, false);
        if (sweep->parsed()) return cmd_experiment(sweep_config, sweep_out, sweep_log, true);
        if (fit->parsed()) return cmd_fit(fit_layout, fit_radius, fit_opb, fit_out);
        if (gen->parsed()) return cmd_layout_gen(grid_spec, gen_out);
        std::cerr << "error: no command given\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
