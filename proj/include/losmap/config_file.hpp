#pragma once

#include <string>

#include "losmap/harness.hpp"

namespace losmap {

/// Parsed `key = value` experiment config with one optional section per
/// estimator. Global keys must precede the estimator sections.
struct ExperimentFileConfig {
    enum class Mode { Precision, PairwiseError };

    Mode mode = Mode::Precision;
    ExperimentConfig experiment;
    std::string layout_file;  // empty = sampled scenarios

    // pairwise-error mode
    std::vector<double> d_values;
    std::vector<double> theta0_values;
    QuadratureSpec quadrature{};
};

ExperimentFileConfig load_experiment_config(const std::string& path);

}  // namespace losmap
