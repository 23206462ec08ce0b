#include "losmap/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace losmap {

namespace {

constexpr Point2D kOrigin{0.0, 0.0};

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

Link link_to(Point2D p) { return Link{kOrigin, p}; }

// Spread a compact submask over the bit positions listed in `positions`.
std::uint64_t spread_mask(std::uint64_t sub, std::span<const int> positions) {
    std::uint64_t mask = 0;
    while (sub != 0) {
        const int bit = std::countr_zero(sub);
        mask |= std::uint64_t{1} << positions[static_cast<std::size_t>(bit)];
        sub &= sub - 1;
    }
    return mask;
}

// Visits all size-k submasks of an m-bit universe in ascending order.
template <typename F>
void for_each_submask_of_size(int m, int k, F&& visit) {
    if (k == 0) {
        visit(std::uint64_t{0});
        return;
    }
    std::uint64_t sub = (std::uint64_t{1} << k) - 1;
    const std::uint64_t limit = std::uint64_t{1} << m;
    while (sub < limit) {
        visit(sub);
        const std::uint64_t c = sub & (~sub + 1);
        const std::uint64_t r = sub + c;
        sub = (((r ^ sub) >> 2) / c) | r;
    }
}

}  // namespace

void EstimatorConfig::validate() const {
    quadrature.validate();
    if (kind == EstimatorKind::Knn || kind == EstimatorKind::Kns ||
        kind == EstimatorKind::KnMap) {
        if (k < 1) throw std::invalid_argument("estimator: k must be >= 1");
    }
    if (kind == EstimatorKind::ParzenGaussian && !(sigma > 0.0)) {
        throw std::invalid_argument("estimator: sigma must be > 0");
    }
    if (kind == EstimatorKind::MapBonferroni && r_max < 1) {
        throw std::invalid_argument("estimator: r_max must be >= 1");
    }
    if (max_n < 0) throw std::invalid_argument("estimator: max_n must be >= 0");
}

const char* estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Map: return "map";
        case EstimatorKind::MapBonferroni: return "map-bonferroni";
        case EstimatorKind::KnMap: return "kn-map";
        case EstimatorKind::Knn: return "knn";
        case EstimatorKind::Kns: return "kns";
        case EstimatorKind::ParzenGaussian: return "pg";
        case EstimatorKind::NaiveBayes: return "nb";
    }
    return "unknown";
}

std::optional<EstimatorKind> estimator_from_name(std::string_view name) {
    if (name == "map") return EstimatorKind::Map;
    if (name == "map-bonferroni") return EstimatorKind::MapBonferroni;
    if (name == "kn-map") return EstimatorKind::KnMap;
    if (name == "knn") return EstimatorKind::Knn;
    if (name == "kns") return EstimatorKind::Kns;
    if (name == "pg") return EstimatorKind::ParzenGaussian;
    if (name == "nb") return EstimatorKind::NaiveBayes;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Vote-based predictors

Prediction knn_predict(std::span<const Measurement> data, Point2D y, int k) {
    if (data.empty()) throw std::invalid_argument("knn_predict: no measurements");
    if (k < 1) throw std::invalid_argument("knn_predict: k must be >= 1");
    const int n = static_cast<int>(data.size());
    const int kk = std::min(k, n);
    std::vector<std::pair<double, int>> order;
    order.reserve(data.size());
    for (int i = 0; i < n; ++i) {
        order.emplace_back((y - data[static_cast<std::size_t>(i)].position).norm_sq(), i);
    }
    std::sort(order.begin(), order.end());
    int ones = 0;
    for (int j = 0; j < kk; ++j) {
        ones += data[static_cast<std::size_t>(order[static_cast<std::size_t>(j)].second)].label;
    }
    return {2 * ones > kk ? 1 : 0, std::nullopt, 0};
}

Prediction kns_predict(std::span<const Measurement> data, Point2D y, int k, double radius) {
    if (data.empty()) throw std::invalid_argument("kns_predict: no measurements");
    if (k < 1) throw std::invalid_argument("kns_predict: k must be >= 1");
    const int n = static_cast<int>(data.size());
    const int kk = std::min(k, n);
    std::vector<std::pair<double, int>> order;
    order.reserve(data.size());
    for (int i = 0; i < n; ++i) {
        const Measurement& m = data[static_cast<std::size_t>(i)];
        double dist;
        if (m.label == 1) {
            dist = point_segment_distance(y, kOrigin, m.position);
        } else {
            const double r = m.position.norm();
            const Point2D boundary =
                r <= kGeomEps ? m.position : (radius / r) * m.position;
            dist = point_segment_distance(y, m.position, boundary);
        }
        order.emplace_back(dist, i);
    }
    std::sort(order.begin(), order.end());
    int ones = 0;
    for (int j = 0; j < kk; ++j) {
        ones += data[static_cast<std::size_t>(order[static_cast<std::size_t>(j)].second)].label;
    }
    return {2 * ones > kk ? 1 : 0, std::nullopt, 0};
}

Prediction parzen_predict(std::span<const Measurement> data, Point2D y, double sigma) {
    if (data.empty()) throw std::invalid_argument("parzen_predict: no measurements");
    if (!(sigma > 0.0)) throw std::invalid_argument("parzen_predict: sigma must be > 0");
    double min_sq = std::numeric_limits<double>::infinity();
    for (const Measurement& m : data) min_sq = std::min(min_sq, (y - m.position).norm_sq());
    // The comparison of the two weight sums is invariant under scaling every
    // weight by exp(min_sq / (2 sigma^2)), which keeps the nearest weight at
    // 1 instead of letting all weights underflow for narrow windows.
    const double inv = 1.0 / (2.0 * sigma * sigma);
    double sum_los = 0.0, sum_nlos = 0.0;
    for (const Measurement& m : data) {
        const double w = std::exp(-((y - m.position).norm_sq() - min_sq) * inv);
        (m.label == 1 ? sum_los : sum_nlos) += w;
    }
    return {sum_los > sum_nlos ? 1 : 0, std::nullopt, 0};
}

// ---------------------------------------------------------------------------
// BayesPredictor

BayesPredictor::BayesPredictor(std::vector<Measurement> data, const ScenarioParams& params,
                               const QuadratureSpec& quad, int point_cap)
    : data_(std::move(data)), params_(params), quad_(quad), point_cap_(point_cap) {
    params_.validate();
    quad_.validate();
    all_indices_.resize(data_.size());
    std::iota(all_indices_.begin(), all_indices_.end(), 0);
    if (data_.size() <= 64) {
        std::vector<Link> links;
        links.reserve(data_.size());
        for (const Measurement& m : data_) links.push_back(link_to(m.position));
        engine_.emplace(std::move(links), params_, quad_);
    }
    singles_.assign(data_.size(), std::numeric_limits<double>::quiet_NaN());
}

std::optional<Prediction> BayesPredictor::coincident_shortcut(std::span<const int> subset,
                                                              Point2D y) const {
    // A query coinciding with a measurement has an observed state.
    for (int i : subset) {
        if (data_[static_cast<std::size_t>(i)].position == y) {
            const int label = data_[static_cast<std::size_t>(i)].label;
            return Prediction{label, label ? 1.0 : 0.0, 0};
        }
    }
    return std::nullopt;
}

Prediction BayesPredictor::map(Point2D y) {
    if (static_cast<int>(data_.size()) > point_cap_) {
        throw CombinatorialBlowupError(
            "map_predict: combinatorial blow-up, " + std::to_string(data_.size()) +
            " measurements exceed the cap of " + std::to_string(point_cap_) +
            "; use the k-nearest-angular-neighbor predictor (kN-MAP) instead");
    }
    return map_on_subset(all_indices_, y, false, std::numeric_limits<std::size_t>::max());
}

Prediction BayesPredictor::map_bonferroni(Point2D y, std::size_t r_max) {
    if (r_max < 1) throw std::invalid_argument("map_predict_bonferroni: r_max must be >= 1");
    if (static_cast<int>(data_.size()) > point_cap_) {
        throw CombinatorialBlowupError(
            "map_predict_bonferroni: combinatorial blow-up, " + std::to_string(data_.size()) +
            " measurements exceed the cap of " + std::to_string(point_cap_) +
            "; use the k-nearest-angular-neighbor predictor (kN-MAP) instead");
    }
    return map_on_subset(all_indices_, y, true, r_max);
}

Prediction BayesPredictor::kn_map(Point2D y, int k) {
    if (k < 1) throw std::invalid_argument("kn_map_predict: k must be >= 1");
    const int n = static_cast<int>(data_.size());
    const int kk = std::min(k, n);
    if (kk > point_cap_) {
        throw CombinatorialBlowupError("kn_map_predict: k exceeds the point cap of " +
                                       std::to_string(point_cap_));
    }
    selection_.clear();
    if (kk == n) {
        selection_ = all_indices_;
    } else {
        std::vector<std::pair<double, int>> order;
        order.reserve(data_.size());
        for (int i = 0; i < n; ++i) {
            order.emplace_back(
                angular_distance(kOrigin, data_[static_cast<std::size_t>(i)].position, y), i);
        }
        std::sort(order.begin(), order.end());
        for (int j = 0; j < kk; ++j) selection_.push_back(order[static_cast<std::size_t>(j)].second);
        std::sort(selection_.begin(), selection_.end());
    }
    return map_on_subset(selection_, y, false, std::numeric_limits<std::size_t>::max());
}

Prediction BayesPredictor::map_on_subset(std::span<const int> subset, Point2D y,
                                         bool bonferroni, std::size_t r_max) {
    if (auto shortcut = coincident_shortcut(subset, y)) return *shortcut;

    if (engine_) {
        engine_->set_query(link_to(y));
        SubsetSplit split;
        for (int i : subset) {
            if (data_[static_cast<std::size_t>(i)].label == 1) {
                split.los_mask |= std::uint64_t{1} << i;
            } else {
                split.nlos_indices.push_back(i);
            }
        }
        return map_with_engine(*engine_, split, subset, y, bonferroni, r_max);
    }

    // More than 64 measurements: build a per-query engine over the subset.
    std::vector<Link> links;
    links.reserve(subset.size());
    SubsetSplit split;
    for (std::size_t pos = 0; pos < subset.size(); ++pos) {
        const Measurement& m = data_[static_cast<std::size_t>(subset[pos])];
        links.push_back(link_to(m.position));
        if (m.label == 1) {
            split.los_mask |= std::uint64_t{1} << pos;
        } else {
            split.nlos_indices.push_back(static_cast<int>(pos));
        }
    }
    ExpectedKEngine local(std::move(links), params_, quad_);
    local.set_query(link_to(y));
    return map_with_engine(local, split, subset, y, bonferroni, r_max);
}

Prediction BayesPredictor::map_with_engine(ExpectedKEngine& engine, const SubsetSplit& split,
                                           std::span<const int> /*subset*/, Point2D /*y*/,
                                           bool bonferroni, std::size_t r_max) {
    const std::span<const int> nlos(split.nlos_indices);
    const int m = static_cast<int>(nlos.size());
    const std::uint64_t w_mask = split.los_mask;
    std::uint64_t terms = 0;

    const auto signed_sum = [&](bool with_query) {
        KahanSum acc;
        for (int k = 0; k <= m; ++k) {
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            for_each_submask_of_size(m, k, [&](std::uint64_t sub) {
                const std::uint64_t mask = w_mask | spread_mask(sub, nlos);
                const double e = with_query ? engine.ek_with_query(mask) : engine.ek(mask);
                acc.add(sign * std::exp(-e));
                ++terms;
            });
        }
        return acc.value();
    };

    const double p_data = signed_sum(false);

    if (!bonferroni) {
        const double p_num = signed_sum(true);
        if (!(p_data > 0.0)) return {0, std::nullopt, terms};  // data pattern has ~zero mass
        const double posterior = clamp01(p_num / p_data);
        return {posterior > 0.5 ? 1 : 0, posterior, terms};
    }

    const double p_wy = std::exp(-engine.ek_with_query(w_mask));
    ++terms;
    if (!(p_data > 0.0)) return {0, std::nullopt, terms};
    if (p_wy <= 0.0) return {0, 0.0, terms};  // numerator bounded by p_wy

    // Decide "posterior > 1/2" as P(or of NLOS-set LOS | LOS set, y LOS) < rhs,
    // bracketing that probability with Bonferroni partial sums.
    const double rhs = 1.0 - 0.5 * p_data / p_wy;
    KahanSum partial;
    for (int r = 1; r <= m; ++r) {
        const double sign = (r % 2 == 1) ? 1.0 : -1.0;
        for_each_submask_of_size(m, r, [&](std::uint64_t sub) {
            const std::uint64_t mask = w_mask | spread_mask(sub, nlos);
            partial.add(sign * std::exp(-engine.ek_with_query(mask)) / p_wy);
            ++terms;
        });
        if (static_cast<std::size_t>(r) <= r_max && r < m) {
            if (r % 2 == 1 && partial.value() < rhs) return {1, std::nullopt, terms};
            if (r % 2 == 0 && partial.value() >= rhs) return {0, std::nullopt, terms};
        }
    }
    // Full expansion reached: the partial sum is now exact.
    const double p_or = partial.value();
    const double posterior = clamp01(p_wy * (1.0 - p_or) / p_data);
    return {p_or < rhs ? 1 : 0, posterior, terms};
}

Prediction BayesPredictor::naive_bayes(Point2D y) {
    if (auto shortcut = coincident_shortcut(all_indices_, y)) return *shortcut;

    const int n = static_cast<int>(data_.size());
    std::uint64_t terms = 0;

    const Link y_link = link_to(y);
    double e_y;
    if (engine_) {
        engine_->set_query(y_link);
        e_y = engine_->ek_with_query(0);
    } else {
        e_y = detail::expected_k_scratch(std::span<const Link>(&y_link, 1), params_, quad_,
                                         scratch_);
    }
    const double p_y = std::exp(-e_y);
    ++terms;
    if (n == 0) return {p_y > 0.5 ? 1 : 0, clamp01(p_y), terms};
    if (p_y <= 0.0) return {0, 0.0, terms};
    if (p_y >= 1.0) return {1, 1.0, terms};

    double ll1 = 0.0, ll0 = 0.0;
    std::array<Link, 2> pair_links{Link{}, y_link};
    for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        double e_i, e_iy;
        if (engine_) {
            const std::uint64_t bit = std::uint64_t{1} << i;
            e_i = engine_->ek(bit);
            e_iy = engine_->ek_with_query(bit);
        } else {
            if (std::isnan(singles_[ui])) {
                const Link li = link_to(data_[ui].position);
                singles_[ui] = detail::expected_k_scratch(std::span<const Link>(&li, 1),
                                                          params_, quad_, scratch_);
            }
            e_i = singles_[ui];
            pair_links[0] = link_to(data_[ui].position);
            e_iy = detail::expected_k_scratch(pair_links, params_, quad_, scratch_);
        }
        const double p_x = std::exp(-e_i);
        const double p_xy = std::exp(-e_iy);
        double j1, j0;
        if (data_[ui].label == 1) {
            j1 = p_xy;
            j0 = std::max(0.0, p_x - p_xy);
        } else {
            j1 = std::max(0.0, p_y - p_xy);
            j0 = std::max(0.0, 1.0 - p_x - p_y + p_xy);
        }
        ll1 += std::log(j1);
        ll0 += std::log(j0);
        terms += 2;
    }
    ll1 -= (n - 1) * std::log(p_y);
    ll0 -= (n - 1) * std::log1p(-p_y);

    double posterior;
    if (std::isinf(ll1) && std::isinf(ll0)) return {0, std::nullopt, terms};
    if (std::isinf(ll1)) {
        posterior = 0.0;
    } else if (std::isinf(ll0)) {
        posterior = 1.0;
    } else {
        posterior = 1.0 / (1.0 + std::exp(ll0 - ll1));
    }
    return {posterior > 0.5 ? 1 : 0, clamp01(posterior), terms};
}

// ---------------------------------------------------------------------------
// One-shot wrappers

namespace {

BayesPredictor make_predictor(std::span<const Measurement> data, const ScenarioParams& params,
                              const QuadratureSpec& quad) {
    return BayesPredictor(std::vector<Measurement>(data.begin(), data.end()), params, quad);
}

}  // namespace

Prediction map_predict(std::span<const Measurement> data, Point2D y,
                       const ScenarioParams& params, const QuadratureSpec& quad) {
    return make_predictor(data, params, quad).map(y);
}

Prediction map_predict_bonferroni(std::span<const Measurement> data, Point2D y,
                                  const ScenarioParams& params, const QuadratureSpec& quad,
                                  std::size_t r_max) {
    return make_predictor(data, params, quad).map_bonferroni(y, r_max);
}

Prediction kn_map_predict(std::span<const Measurement> data, Point2D y,
                          const ScenarioParams& params, const QuadratureSpec& quad, int k) {
    return make_predictor(data, params, quad).kn_map(y, k);
}

Prediction naive_bayes_predict(std::span<const Measurement> data, Point2D y,
                               const ScenarioParams& params, const QuadratureSpec& quad) {
    return make_predictor(data, params, quad).naive_bayes(y);
}

Prediction predict_one(const EstimatorConfig& config, std::span<const Measurement> data,
                       Point2D y, const ScenarioParams& params) {
    config.validate();
    switch (config.kind) {
        case EstimatorKind::Map:
            return map_predict(data, y, params, config.quadrature);
        case EstimatorKind::MapBonferroni:
            return map_predict_bonferroni(data, y, params, config.quadrature, config.r_max);
        case EstimatorKind::KnMap:
            return kn_map_predict(data, y, params, config.quadrature, config.k);
        case EstimatorKind::Knn:
            return knn_predict(data, y, config.k);
        case EstimatorKind::Kns:
            return kns_predict(data, y, config.k, params.radius);
        case EstimatorKind::ParzenGaussian:
            return parzen_predict(data, y, config.sigma);
        case EstimatorKind::NaiveBayes:
            return naive_bayes_predict(data, y, params, config.quadrature);
    }
    throw std::logic_error("predict_one: unknown estimator kind");
}

}  // namespace losmap
