#include "losmap/config_file.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "losmap/layout_io.hpp"

namespace losmap {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& path, std::size_t line, const std::string& key,
                 const std::string& value) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
        throw ParseError(path, line, key + ": expected a number, got '" + value + "'");
    }
    return v;
}

long long to_int(const std::string& path, std::size_t line, const std::string& key,
                 const std::string& value) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ParseError(path, line, key + ": expected an integer, got '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& path, std::size_t line, const std::string& key,
             const std::string& value) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw ParseError(path, line, key + ": expected on/off, got '" + value + "'");
}

std::vector<double> to_list(const std::string& path, std::size_t line, const std::string& key,
                            const std::string& value) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t comma = value.find(',', pos);
        if (comma == std::string::npos) comma = value.size();
        const std::string field = trim(value.substr(pos, comma - pos));
        if (field.empty()) throw ParseError(path, line, key + ": empty list entry");
        out.push_back(to_double(path, line, key, field));
        pos = comma + 1;
    }
    return out;
}

}  // namespace

ExperimentFileConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "': " + std::strerror(errno));

    ExperimentFileConfig cfg;
    ExperimentConfig& exp = cfg.experiment;
    exp.estimators.clear();
    double lmax = exp.params.length_dist.upper();

    std::string line;
    std::size_t line_no = 0;
    int current_estimator = -1;  // -1 = global scope
    bool saw_section = false;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;

        if (t.front() == '[') {
            if (t.back() != ']') throw ParseError(path, line_no, "unterminated section header");
            const std::string inner = trim(t.substr(1, t.size() - 2));
            const std::string prefix = "estimator";
            if (inner.rfind(prefix, 0) != 0) {
                throw ParseError(path, line_no, "unknown section '" + inner + "'");
            }
            const std::string name = trim(inner.substr(prefix.size()));
            const auto kind = estimator_from_name(name);
            if (!kind) {
                throw ParseError(path, line_no,
                                 "unknown estimator '" + name +
                                     "' (expected map, map-bonferroni, kn-map, knn, kns, pg, nb)");
            }
            EstimatorConfig est;
            est.kind = *kind;
            est.quadrature = cfg.quadrature;
            if (est.kind == EstimatorKind::Kns) est.k = 1;
            exp.estimators.emplace_back(name, est);
            current_estimator = static_cast<int>(exp.estimators.size()) - 1;
            saw_section = true;
            continue;
        }

        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path, line_no, "expected 'key = value', got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ParseError(path, line_no, "expected 'key = value', got '" + t + "'");
        }

        if (current_estimator < 0) {
            if (saw_section) {
                throw ParseError(path, line_no, "global key '" + key +
                                                    "' must come before estimator sections");
            }
            if (key == "radius-m") {
                exp.params.radius = to_double(path, line_no, key, value);
            } else if (key == "lambda-per-m2") {
                exp.params.lambda = to_double(path, line_no, key, value);
            } else if (key == "lmax-m") {
                lmax = to_double(path, line_no, key, value);
                if (!(lmax > 0.0)) throw ParseError(path, line_no, "lmax-m must be > 0");
                exp.params.length_dist = DistributionSpec::uniform(0.0, lmax);
            } else if (key == "n-measurements") {
                exp.n_measurements = static_cast<int>(to_int(path, line_no, key, value));
            } else if (key == "n-trials") {
                exp.n_trials = static_cast<int>(to_int(path, line_no, key, value));
            } else if (key == "n-est") {
                exp.grid_size = static_cast<int>(to_int(path, line_no, key, value));
            } else if (key == "master-seed") {
                exp.master_seed = static_cast<std::uint64_t>(to_int(path, line_no, key, value));
            } else if (key == "timing") {
                exp.timing = to_bool(path, line_no, key, value);
            } else if (key == "threads") {
                exp.threads = static_cast<int>(to_int(path, line_no, key, value));
            } else if (key == "sweep") {
                if (value == "none") {
                    exp.sweep = SweepAxis::None;
                } else if (value == "n") {
                    exp.sweep = SweepAxis::NMeasurements;
                } else if (value == "lambda") {
                    exp.sweep = SweepAxis::Lambda;
                } else {
                    throw ParseError(path, line_no, "sweep: expected none, n or lambda");
                }
            } else if (key == "sweep-values") {
                exp.sweep_values = to_list(path, line_no, key, value);
            } else if (key == "layout-file") {
                cfg.layout_file = value;
            } else if (key == "quad-nodes-l") {
                cfg.quadrature.nodes_l = static_cast<int>(to_int(path, line_no, key, value));
            } else if (key == "quad-nodes-theta") {
                cfg.quadrature.nodes_theta = static_cast<int>(to_int(path, line_no, key, value));
            } else if (key == "mode") {
                if (value == "precision") {
                    cfg.mode = ExperimentFileConfig::Mode::Precision;
                } else if (value == "pairwise-error") {
                    cfg.mode = ExperimentFileConfig::Mode::PairwiseError;
                } else {
                    throw ParseError(path, line_no, "mode: expected precision or pairwise-error");
                }
            } else if (key == "d-values-m") {
                cfg.d_values = to_list(path, line_no, key, value);
            } else if (key == "theta0-values") {
                cfg.theta0_values = to_list(path, line_no, key, value);
            } else {
                throw ParseError(path, line_no, "unknown global key '" + key + "'");
            }
            continue;
        }

        EstimatorConfig& est = exp.estimators[static_cast<std::size_t>(current_estimator)].second;
        if (key == "k") {
            est.k = static_cast<int>(to_int(path, line_no, key, value));
        } else if (key == "sigma-m") {
            est.sigma = to_double(path, line_no, key, value);
        } else if (key == "r-max") {
            const long long r = to_int(path, line_no, key, value);
            if (r < 1) throw ParseError(path, line_no, "r-max must be >= 1");
            est.r_max = static_cast<std::size_t>(r);
        } else if (key == "max-n") {
            est.max_n = static_cast<int>(to_int(path, line_no, key, value));
        } else if (key == "quad-nodes-l") {
            est.quadrature.nodes_l = static_cast<int>(to_int(path, line_no, key, value));
        } else if (key == "quad-nodes-theta") {
            est.quadrature.nodes_theta = static_cast<int>(to_int(path, line_no, key, value));
        } else {
            throw ParseError(path, line_no, "unknown estimator key '" + key + "'");
        }
    }

    if (cfg.mode == ExperimentFileConfig::Mode::PairwiseError) {
        if (cfg.d_values.empty() || cfg.theta0_values.empty()) {
            throw std::invalid_argument(path +
                                        ": pairwise-error mode needs d-values-m and theta0-values");
        }
    }
    return cfg;
}

}  // namespace losmap
