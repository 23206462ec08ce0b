#pragma once

#include <optional>
#include <string>
#include <utility>

#include "losmap/estimators.hpp"

namespace losmap {

enum class SweepAxis { None, NMeasurements, Lambda };

/// Trial seeds are master_seed + trial_index * this stride (odd, so the seed
/// sequence never collides modulo 2^64).
inline constexpr std::uint64_t kTrialSeedStride = 0x9E3779B97F4A7C15ull;

struct ExperimentConfig {
    ScenarioParams params;
    int n_measurements = 30;
    int n_trials = 1;
    std::vector<std::pair<std::string, EstimatorConfig>> estimators;
    int grid_size = 88;
    SweepAxis sweep = SweepAxis::None;
    std::vector<double> sweep_values;
    std::uint64_t master_seed = 1;
    /// When set, every trial evaluates against this layout instead of
    /// sampling one; only the measurement positions are redrawn.
    std::optional<Layout> fixed_layout;
    bool timing = true;
    bool collect_trial_log = false;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const;
};

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct TrialEstimatorResult {
    bool failed = false;
    std::string error;
    double rho = 0.0;
    ConfusionCounts confusion;
    std::vector<double> times_us;
};

struct TrialResult {
    std::vector<TrialEstimatorResult> per_estimator;  // parallel to config.estimators
};

struct ReportRow {
    double sweep_value = 0.0;  // meaningful only when has_sweep
    bool has_sweep = false;
    std::string estimator;
    int trials_ok = 0;
    int fail_count = 0;
    double mean_rho = 0.0;
    double std_rho = 0.0;  // sample std over trials
    ConfusionCounts confusion;
    double mean_time_us = 0.0;
    double median_time_us = 0.0;
};

struct EvaluationReport {
    std::vector<ReportRow> rows;
    std::string trial_log_csv;  // populated when collect_trial_log

    /// One row per estimator x sweep point:
    /// sweep_value,estimator,mean_rho,std_rho,mean_time_us,median_time_us,fail_count
    /// Time fields are left empty when include_timing is false.
    std::string to_csv(bool include_timing) const;
};

/// Square lattice offset by half a pitch (no sample on the BS itself),
/// clipped to the open disk. The pitch is derived from the exact lattice
/// shell radii so the in-disk count equals n_est; counts that no pitch can
/// reach raise an error listing the nearest achievable ones. n_est = 1 is
/// special-cased to the single BS-adjacent offset point.
std::vector<Point2D> generate_grid(double radius, int n_est);

/// One Monte-Carlo trial: sample (or reuse) the layout, draw the labeled
/// measurements, predict every grid point with every estimator and score
/// against the ray-traced ground truth. Estimator failures are captured per
/// estimator, not propagated.
TrialResult run_trial(const ExperimentConfig& config, const std::vector<Point2D>& grid,
                      std::uint64_t trial_seed);

/// Full experiment: n_trials independent trials per sweep point, aggregated
/// into mean/std precision, pooled confusion counts and timing statistics.
EvaluationReport run_experiment(const ExperimentConfig& config);

struct BenchmarkRow {
    std::string estimator;
    int n = 0;
    double median_us = 0.0;
    double mean_us = 0.0;
};

struct BenchmarkTable {
    std::vector<BenchmarkRow> rows;
    /// Median time for (estimator, n); quiet NaN when absent.
    double median_us(const std::string& estimator, int n) const;
};

/// Median per-prediction wall time against measurement count. Estimators
/// whose max_n is exceeded are skipped at that N.
BenchmarkTable benchmark_complexity(const ScenarioParams& params,
                                    const std::vector<std::pair<std::string, EstimatorConfig>>& estimators,
                                    const std::vector<int>& n_values, int n_queries,
                                    std::uint64_t seed);

/// Least-squares slope of log(y) against log(x).
double fitted_power_exponent(std::span<const double> x, std::span<const double> y);

/// R^2 of the ordinary least-squares line y = a + b x.
double linear_fit_r2(std::span<const double> x, std::span<const double> y);

}  // namespace losmap
