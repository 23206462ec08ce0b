#include "losmap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "losmap/random.hpp"

namespace losmap {

void ExperimentConfig::validate() const {
    params.validate();
    if (n_measurements < 0) throw std::invalid_argument("experiment: n-measurements must be >= 0");
    if (n_trials < 1) throw std::invalid_argument("experiment: n-trials must be >= 1");
    if (grid_size < 1) throw std::invalid_argument("experiment: n-est must be >= 1");
    if (estimators.empty()) throw std::invalid_argument("experiment: no estimators configured");
    for (const auto& [name, cfg] : estimators) {
        if (name.empty()) throw std::invalid_argument("experiment: estimator with empty name");
        cfg.validate();
    }
    if (sweep != SweepAxis::None && sweep_values.empty()) {
        throw std::invalid_argument("experiment: sweep requested but no sweep values");
    }
    if (sweep == SweepAxis::NMeasurements) {
        for (double v : sweep_values) {
            if (v < 0 || v != std::floor(v)) {
                throw std::invalid_argument("experiment: N sweep values must be non-negative integers");
            }
        }
    }
    if (sweep == SweepAxis::Lambda) {
        for (double v : sweep_values) {
            if (!(v >= 0.0)) throw std::invalid_argument("experiment: lambda sweep values must be >= 0");
        }
    }
    if (threads < 0) throw std::invalid_argument("experiment: threads must be >= 0");
}

// ---------------------------------------------------------------------------
// Estimation grid

std::vector<Point2D> generate_grid(double radius, int n_est) {
    if (n_est < 1) throw std::invalid_argument("generate_grid: n_est must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("generate_grid: radius must be > 0");
    if (n_est == 1) {
        // The BS-adjacent offset point of a pitch-R lattice.
        return {Point2D{0.5 * radius, 0.5 * radius}};
    }
    if (n_est % 4 != 0) {
        throw std::invalid_argument(
            "generate_grid: the offset lattice only realizes multiples of 4 in-disk points; " +
            std::to_string(n_est) + " is unreachable (nearest: " +
            std::to_string(n_est - n_est % 4) + ", " + std::to_string(n_est + 4 - n_est % 4) +
            ")");
    }

    // Offset lattice ((i+1/2)p, (j+1/2)p). Work with the exact integer shell
    // radii 4*|(i+1/2, j+1/2)|^2 = (2i+1)^2 + (2j+1)^2 of one quadrant; each
    // shell entry contributes 4 points (sign choices).
    const int quarter_target = n_est / 4;
    const int span = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(quarter_target)))) + 4;
    std::map<long long, int> shells;  // norm4 -> quadrant multiplicity
    for (int i = 0; i < span; ++i) {
        for (int j = 0; j < span; ++j) {
            const long long n4 =
                static_cast<long long>(2 * i + 1) * (2 * i + 1) +
                static_cast<long long>(2 * j + 1) * (2 * j + 1);
            shells[n4] += 1;
        }
    }
    long long cumulative = 0;
    long long reached_n4 = -1, next_n4 = -1;
    long long below = 0, above = 0;
    for (const auto& [n4, mult] : shells) {
        const long long next_cum = cumulative + mult;
        if (next_cum == quarter_target) {
            reached_n4 = n4;
        } else if (cumulative < quarter_target && next_cum > quarter_target) {
            below = 4 * cumulative;
            above = 4 * next_cum;
        }
        if (reached_n4 >= 0 && n4 > reached_n4) {
            next_n4 = n4;
            break;
        }
        cumulative = next_cum;
    }
    if (reached_n4 < 0) {
        throw std::invalid_argument("generate_grid: no lattice pitch yields exactly " +
                                    std::to_string(n_est) + " points (nearest achievable: " +
                                    std::to_string(below) + ", " + std::to_string(above) + ")");
    }
    // Any threshold strictly between the two shell radii realizes the count;
    // take the midpoint. radius/t is then the pitch.
    const double t = 0.25 * (std::sqrt(static_cast<double>(reached_n4)) +
                             std::sqrt(static_cast<double>(next_n4)));
    const double pitch = radius / t;

    std::vector<Point2D> grid;
    grid.reserve(static_cast<std::size_t>(n_est));
    const int max_idx = static_cast<int>(std::ceil(t)) + 1;
    for (int i = -max_idx; i < max_idx; ++i) {
        for (int j = -max_idx; j < max_idx; ++j) {
            const Point2D p{(i + 0.5) * pitch, (j + 0.5) * pitch};
            if (p.norm_sq() < radius * radius) grid.push_back(p);
        }
    }
    if (static_cast<int>(grid.size()) != n_est) {
        throw std::logic_error("generate_grid: internal count mismatch");
    }
    std::sort(grid.begin(), grid.end(), [](Point2D a, Point2D b) {
        return a.y < b.y || (a.y == b.y && a.x < b.x);
    });
    return grid;
}

// ---------------------------------------------------------------------------
// Trials

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Clock {
    using TimePoint = std::chrono::steady_clock::time_point;
    static TimePoint now() { return std::chrono::steady_clock::now(); }
    static double us_between(TimePoint a, TimePoint b) {
        return std::chrono::duration<double, std::micro>(b - a).count();
    }
};

}  // namespace

TrialResult run_trial(const ExperimentConfig& config, const std::vector<Point2D>& grid,
                      std::uint64_t trial_seed) {
    const ScenarioParams& params = config.params;
    const Layout layout =
        config.fixed_layout ? *config.fixed_layout : sample_layout(params, trial_seed);

    RandomStream measurement_rng(splitmix64(trial_seed));
    std::vector<Measurement> data;
    data.reserve(static_cast<std::size_t>(config.n_measurements));
    for (int i = 0; i < config.n_measurements; ++i) {
        const Point2D pos = measurement_rng.point_in_disk(params.radius);
        data.push_back({pos, is_los(layout, {0.0, 0.0}, pos)});
    }

    std::vector<int> truth(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) truth[g] = is_los(layout, {0.0, 0.0}, grid[g]);

    TrialResult result;
    result.per_estimator.resize(config.estimators.size());
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
        const EstimatorConfig& est = config.estimators[e].second;
        TrialEstimatorResult& out = result.per_estimator[e];
        try {
            // Bayesian predictors persist across the grid so that
            // measurement-only subset values are computed once.
            std::optional<BayesPredictor> bayes;
            if (est.kind == EstimatorKind::Map || est.kind == EstimatorKind::MapBonferroni ||
                est.kind == EstimatorKind::KnMap || est.kind == EstimatorKind::NaiveBayes) {
                bayes.emplace(data, params, est.quadrature);
            }
            long correct = 0;
            if (config.timing) out.times_us.reserve(grid.size());
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const auto t0 = Clock::now();
                Prediction pred;
                switch (est.kind) {
                    case EstimatorKind::Map: pred = bayes->map(grid[g]); break;
                    case EstimatorKind::MapBonferroni:
                        pred = bayes->map_bonferroni(grid[g], est.r_max);
                        break;
                    case EstimatorKind::KnMap: pred = bayes->kn_map(grid[g], est.k); break;
                    case EstimatorKind::NaiveBayes: pred = bayes->naive_bayes(grid[g]); break;
                    case EstimatorKind::Knn: pred = knn_predict(data, grid[g], est.k); break;
                    case EstimatorKind::Kns:
                        pred = kns_predict(data, grid[g], est.k, params.radius);
                        break;
                    case EstimatorKind::ParzenGaussian:
                        pred = parzen_predict(data, grid[g], est.sigma);
                        break;
                }
                if (config.timing) out.times_us.push_back(Clock::us_between(t0, Clock::now()));
                if (pred.label == truth[g]) ++correct;
                if (truth[g] == 1) {
                    (pred.label == 1 ? out.confusion.tp : out.confusion.fn) += 1;
                } else {
                    (pred.label == 0 ? out.confusion.tn : out.confusion.fp) += 1;
                }
            }
            out.rho = static_cast<double>(correct) / static_cast<double>(grid.size());
        } catch (const std::exception& ex) {
            out = TrialEstimatorResult{};
            out.failed = true;
            out.error = ex.what();
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

void append_csv_double(std::string& out, double v, const char* fmt = "%.9g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    out += buf;
}

std::vector<TrialResult> run_trials_parallel(const ExperimentConfig& config,
                                             const std::vector<Point2D>& grid) {
    std::vector<TrialResult> results(static_cast<std::size_t>(config.n_trials));
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned n_threads = std::min<unsigned>(
        config.threads > 0 ? static_cast<unsigned>(config.threads) : hw,
        static_cast<unsigned>(config.n_trials));
    if (n_threads <= 1) {
        for (int t = 0; t < config.n_trials; ++t) {
            results[static_cast<std::size_t>(t)] =
                run_trial(config, grid, config.master_seed + static_cast<std::uint64_t>(t) * kTrialSeedStride);
        }
        return results;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        try {
            while (true) {
                const int t = next.fetch_add(1);
                if (t >= config.n_trials) break;
                results[static_cast<std::size_t>(t)] = run_trial(
                    config, grid, config.master_seed + static_cast<std::uint64_t>(t) * kTrialSeedStride);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

}  // namespace

EvaluationReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::vector<Point2D> grid = generate_grid(config.params.radius, config.grid_size);

    std::vector<double> sweep_points;
    if (config.sweep == SweepAxis::None) {
        sweep_points.push_back(0.0);
    } else {
        sweep_points = config.sweep_values;
    }

    EvaluationReport report;
    std::string& log = report.trial_log_csv;
    if (config.collect_trial_log) {
        log = "sweep_value,trial,estimator,rho,tp,fp,tn,fn,failed\n";
    }

    for (double point : sweep_points) {
        ExperimentConfig local = config;
        local.collect_trial_log = false;
        if (config.sweep == SweepAxis::NMeasurements) {
            local.n_measurements = static_cast<int>(point);
        } else if (config.sweep == SweepAxis::Lambda) {
            local.params.lambda = point;
        }
        // Estimators restricted to smaller data sets drop out of this sweep
        // point entirely (no row).
        std::vector<std::pair<std::string, EstimatorConfig>> active;
        for (std::size_t e = 0; e < config.estimators.size(); ++e) {
            const EstimatorConfig& est = config.estimators[e].second;
            if (est.max_n > 0 && local.n_measurements > est.max_n) continue;
            active.push_back(config.estimators[e]);
        }
        local.estimators = std::move(active);
        if (local.estimators.empty()) continue;

        const std::vector<TrialResult> trials = run_trials_parallel(local, grid);

        for (std::size_t le = 0; le < local.estimators.size(); ++le) {
            ReportRow row;
            row.has_sweep = config.sweep != SweepAxis::None;
            row.sweep_value = point;
            row.estimator = local.estimators[le].first;
            std::vector<double> rhos;
            std::vector<double> pooled_times;
            for (const TrialResult& trial : trials) {
                const TrialEstimatorResult& r = trial.per_estimator[le];
                if (r.failed) {
                    ++row.fail_count;
                    continue;
                }
                ++row.trials_ok;
                rhos.push_back(r.rho);
                row.confusion.tp += r.confusion.tp;
                row.confusion.fp += r.confusion.fp;
                row.confusion.tn += r.confusion.tn;
                row.confusion.fn += r.confusion.fn;
                pooled_times.insert(pooled_times.end(), r.times_us.begin(), r.times_us.end());
            }
            if (!rhos.empty()) {
                double sum = 0.0;
                for (double r : rhos) sum += r;
                row.mean_rho = sum / static_cast<double>(rhos.size());
                if (rhos.size() > 1) {
                    double ss = 0.0;
                    for (double r : rhos) ss += (r - row.mean_rho) * (r - row.mean_rho);
                    row.std_rho = std::sqrt(ss / static_cast<double>(rhos.size() - 1));
                }
            }
            if (!pooled_times.empty()) {
                double sum = 0.0;
                for (double t : pooled_times) sum += t;
                row.mean_time_us = sum / static_cast<double>(pooled_times.size());
                row.median_time_us = median_of(std::move(pooled_times));
            }
            report.rows.push_back(std::move(row));
        }

        if (config.collect_trial_log) {
            for (std::size_t t = 0; t < trials.size(); ++t) {
                for (std::size_t le = 0; le < local.estimators.size(); ++le) {
                    const TrialEstimatorResult& r = trials[t].per_estimator[le];
                    if (config.sweep != SweepAxis::None) append_csv_double(log, point);
                    log += ',';
                    log += std::to_string(t);
                    log += ',';
                    log += local.estimators[le].first;
                    log += ',';
                    append_csv_double(log, r.rho);
                    log += ',';
                    log += std::to_string(r.confusion.tp);
                    log += ',';
                    log += std::to_string(r.confusion.fp);
                    log += ',';
                    log += std::to_string(r.confusion.tn);
                    log += ',';
                    log += std::to_string(r.confusion.fn);
                    log += ',';
                    log += r.failed ? '1' : '0';
                    log += '\n';
                }
            }
        }
    }
    return report;
}

std::string EvaluationReport::to_csv(bool include_timing) const {
    std::string out = "sweep_value,estimator,mean_rho,std_rho,mean_time_us,median_time_us,fail_count\n";
    for (const ReportRow& row : rows) {
        if (row.has_sweep) append_csv_double(out, row.sweep_value);
        out += ',';
        out += row.estimator;
        out += ',';
        append_csv_double(out, row.mean_rho);
        out += ',';
        append_csv_double(out, row.std_rho);
        out += ',';
        if (include_timing) append_csv_double(out, row.mean_time_us, "%.3f");
        out += ',';
        if (include_timing) append_csv_double(out, row.median_time_us, "%.3f");
        out += ',';
        out += std::to_string(row.fail_count);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Complexity benchmark

double BenchmarkTable::median_us(const std::string& estimator, int n) const {
    for (const BenchmarkRow& row : rows) {
        if (row.estimator == estimator && row.n == n) return row.median_us;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

BenchmarkTable benchmark_complexity(
    const ScenarioParams& params,
    const std::vector<std::pair<std::string, EstimatorConfig>>& estimators,
    const std::vector<int>& n_values, int n_queries, std::uint64_t seed) {
    params.validate();
    if (n_queries < 1) throw std::invalid_argument("benchmark: n_queries must be >= 1");
    BenchmarkTable table;
    for (int n : n_values) {
        const std::uint64_t scenario_seed = seed + static_cast<std::uint64_t>(n) * kTrialSeedStride;
        const Layout layout = sample_layout(params, scenario_seed);
        RandomStream rng(splitmix64(scenario_seed));
        std::vector<Measurement> data;
        data.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const Point2D pos = rng.point_in_disk(params.radius);
            data.push_back({pos, is_los(layout, {0.0, 0.0}, pos)});
        }
        std::vector<Point2D> queries;
        queries.reserve(static_cast<std::size_t>(n_queries));
        for (int q = 0; q < n_queries; ++q) queries.push_back(rng.point_in_disk(params.radius));

        for (const auto& [name, est] : estimators) {
            if (est.max_n > 0 && n > est.max_n) continue;
            std::optional<BayesPredictor> bayes;
            if (est.kind == EstimatorKind::Map || est.kind == EstimatorKind::MapBonferroni ||
                est.kind == EstimatorKind::KnMap || est.kind == EstimatorKind::NaiveBayes) {
                bayes.emplace(data, params, est.quadrature);
            }
            std::vector<double> times;
            times.reserve(queries.size());
            for (const Point2D& y : queries) {
                const auto t0 = Clock::now();
                switch (est.kind) {
                    case EstimatorKind::Map: bayes->map(y); break;
                    case EstimatorKind::MapBonferroni: bayes->map_bonferroni(y, est.r_max); break;
                    case EstimatorKind::KnMap: bayes->kn_map(y, est.k); break;
                    case EstimatorKind::NaiveBayes: bayes->naive_bayes(y); break;
                    case EstimatorKind::Knn: knn_predict(data, y, est.k); break;
                    case EstimatorKind::Kns: kns_predict(data, y, est.k, params.radius); break;
                    case EstimatorKind::ParzenGaussian: parzen_predict(data, y, est.sigma); break;
                }
                times.push_back(Clock::us_between(t0, Clock::now()));
            }
            BenchmarkRow row;
            row.estimator = name;
            row.n = n;
            double sum = 0.0;
            for (double t : times) sum += t;
            row.mean_us = sum / static_cast<double>(times.size());
            row.median_us = median_of(std::move(times));
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

double fitted_power_exponent(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("fitted_power_exponent: need matching samples, >= 2");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double linear_fit_r2(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw std::invalid_argument("linear_fit_r2: need matching samples, >= 3");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    const double mean_y = sy / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double fit = intercept + slope * x[i];
        ss_res += (y[i] - fit) * (y[i] - fit);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
}

}  // namespace losmap
