#include "losmap/blockage_model.hpp"

#include <algorithm>
#include <cmath>

#include "losmap/quadrature.hpp"
#include "losmap/random.hpp"

namespace losmap {

namespace {

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

// ---------------------------------------------------------------------------
// DistributionSpec

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
    DistributionSpec d;
    d.uniform_ = true;
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
}

DistributionSpec DistributionSpec::tabulated(std::vector<double> knots,
                                             std::vector<double> density) {
    DistributionSpec d;
    d.uniform_ = false;
    d.knots_ = std::move(knots);
    d.density_ = std::move(density);
    if (d.knots_.size() < 2 || d.knots_.size() != d.density_.size()) {
        throw std::invalid_argument("tabulated distribution: need matching knot/density lists");
    }
    d.lo_ = d.knots_.front();
    d.hi_ = d.knots_.back();
    d.cdf_.resize(d.knots_.size());
    d.cdf_[0] = 0.0;
    for (std::size_t i = 1; i < d.knots_.size(); ++i) {
        const double h = d.knots_[i] - d.knots_[i - 1];
        d.cdf_[i] = d.cdf_[i - 1] + 0.5 * h * (d.density_[i] + d.density_[i - 1]);
    }
    return d;
}

double DistributionSpec::pdf(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    if (uniform_) return 1.0 / (hi_ - lo_);
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    if (i == 0) return density_.front();
    if (i == knots_.size()) return density_.back();
    const double h = knots_[i] - knots_[i - 1];
    const double s = (x - knots_[i - 1]) / h;
    return density_[i - 1] + s * (density_[i] - density_[i - 1]);
}

double DistributionSpec::mean() const {
    if (uniform_) return 0.5 * (lo_ + hi_);
    double acc = 0.0;
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        const double h = knots_[i] - knots_[i - 1];
        const double x0 = knots_[i - 1];
        const double f0 = density_[i - 1];
        const double df = density_[i] - density_[i - 1];
        // int_0^1 (x0 + h s)(f0 + df s) h ds
        acc += h * (x0 * f0 + 0.5 * (x0 * df + h * f0) + h * df / 3.0);
    }
    return acc;
}

double DistributionSpec::quantile(double u) const {
    if (uniform_) return lo_ + (hi_ - lo_) * u;
    const double target = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    if (i == 0) return lo_;
    if (i >= cdf_.size()) return hi_;
    const double h = knots_[i] - knots_[i - 1];
    const double f0 = density_[i - 1];
    const double df = density_[i] - density_[i - 1];
    const double rem = (target - cdf_[i - 1]) / h;  // = f0 s + df s^2 / 2
    double s;
    if (std::abs(df) < 1e-14 * std::max(f0, 1.0)) {
        s = f0 > 0.0 ? rem / f0 : 0.0;
    } else {
        const double disc = std::max(0.0, f0 * f0 + 2.0 * df * rem);
        s = (-f0 + std::sqrt(disc)) / df;
    }
    return knots_[i - 1] + h * std::clamp(s, 0.0, 1.0);
}

void DistributionSpec::validate() const {
    if (!std::isfinite(lo_) || !std::isfinite(hi_) || hi_ <= lo_) {
        throw std::invalid_argument("distribution: support must be a finite interval");
    }
    if (uniform_) return;
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        if (!(knots_[i] > knots_[i - 1])) {
            throw std::invalid_argument("distribution: knots must be strictly ascending");
        }
    }
    for (double f : density_) {
        if (!std::isfinite(f) || f < 0.0) {
            throw std::invalid_argument("distribution: density must be finite and non-negative");
        }
    }
    if (std::abs(cdf_.back() - 1.0) > 1e-6) {
        throw std::invalid_argument("distribution: density must integrate to 1 within 1e-6");
    }
}

void ScenarioParams::validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw std::invalid_argument("params: radius must be positive");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("params: lambda must be non-negative");
    }
    length_dist.validate();
    orientation_dist.validate();
    if (length_dist.lower() < 0.0) {
        throw std::invalid_argument("params: obstacle lengths must be non-negative");
    }
    if (orientation_dist.lower() < -kGeomEps || orientation_dist.upper() > kPi + kGeomEps) {
        throw std::invalid_argument("params: orientation support must lie in [0, pi]");
    }
}

void QuadratureSpec::validate() const {
    if (nodes_l < 8 || nodes_theta < 8) {
        throw std::invalid_argument("quadrature: need at least 8 nodes per dimension");
    }
}

// ---------------------------------------------------------------------------
// expected_k

namespace {

void check_common_bs(std::span<const Link> links) {
    for (const Link& link : links) {
        if (distance(link.a, links.front().a) > kGeomEps) {
            throw std::invalid_argument("expected_k: links must share the BS endpoint");
        }
    }
}

// Nodes and weights for the l integral; weights carry the jacobian and f_L.
void build_length_nodes(const ScenarioParams& params, const QuadratureSpec& quad,
                        std::vector<double>& nodes, std::vector<double>& weights) {
    const GaussRule& rule = gauss_legendre(quad.nodes_l);
    const double lo = params.length_dist.lower();
    const double hi = params.length_dist.upper();
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    nodes.resize(rule.nodes.size());
    weights.resize(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        nodes[i] = mid + half * rule.nodes[i];
        weights[i] = half * rule.weights[i] * params.length_dist.pdf(nodes[i]);
    }
}

// Theta panels over [0, pi) split at the links' azimuths mod pi, where the
// per-link area d*l*|sin(theta - phi)| has its kinks.
void build_theta_panels(std::span<const Link> links, std::vector<double>& kinks) {
    kinks.clear();
    kinks.push_back(0.0);
    for (const Link& link : links) {
        if (link.length() <= kGeomEps) continue;
        const double phi = normalize_orientation(link.azimuth());
        if (phi > 1e-12 && phi < kPi - 1e-12) kinks.push_back(phi);
    }
    kinks.push_back(kPi);
    std::sort(kinks.begin(), kinks.end());
    kinks.erase(std::unique(kinks.begin(), kinks.end(),
                            [](double a, double b) { return b - a < 1e-12; }),
                kinks.end());
    if (kinks.back() < kPi) kinks.push_back(kPi);
}

double expected_k_single(const Link& link, const ScenarioParams& params,
                         const QuadratureSpec& quad, detail::EkScratch& s) {
    const double d = link.length();
    if (d <= 0.0) return 0.0;
    // A(l, theta) = d * l * |sin(theta - phi)| factorizes, so the tensor
    // quadrature reduces to the product of its two 1-D factors.
    std::vector<double>& l_nodes = s.l_nodes;
    std::vector<double>& l_weights = s.l_weights;
    std::vector<double>& kinks = s.kinks;
    double mean_length = 0.0;
    for (std::size_t i = 0; i < l_nodes.size(); ++i) mean_length += l_weights[i] * l_nodes[i];

    build_theta_panels(std::span<const Link>(&link, 1), kinks);
    const double phi = normalize_orientation(link.azimuth());
    double mean_sin = 0.0;
    for (std::size_t p = 0; p + 1 < kinks.size(); ++p) {
        const double ta = kinks[p];
        const double tb = kinks[p + 1];
        const int n = std::max(4, static_cast<int>(std::llround(
                                      quad.nodes_theta * (tb - ta) / kPi)));
        const GaussRule& rule = gauss_legendre(n);
        const double mid = 0.5 * (ta + tb);
        const double half = 0.5 * (tb - ta);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double theta = mid + half * rule.nodes[i];
            const double w = half * rule.weights[i] * params.orientation_dist.pdf(theta);
            mean_sin += w * std::abs(std::sin(theta - phi));
        }
    }
    return params.lambda * d * mean_length * mean_sin;
}

}  // namespace

namespace detail {

double expected_k_scratch(std::span<const Link> links, const ScenarioParams& params,
                          const QuadratureSpec& quad, EkScratch& s) {
    if (params.lambda == 0.0 || links.empty()) return 0.0;
    if (!s.l_ready) {
        build_length_nodes(params, quad, s.l_nodes, s.l_weights);
        s.l_ready = true;
    }
    if (links.size() == 1) return expected_k_single(links.front(), params, quad, s);
    build_theta_panels(links, s.kinks);

    double acc = 0.0;
    for (std::size_t p = 0; p + 1 < s.kinks.size(); ++p) {
        const double ta = s.kinks[p];
        const double tb = s.kinks[p + 1];
        const int n = std::max(4, static_cast<int>(std::llround(
                                      quad.nodes_theta * (tb - ta) / kPi)));
        const GaussRule& rule = gauss_legendre(n);
        const double mid = 0.5 * (ta + tb);
        const double half = 0.5 * (tb - ta);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double theta = mid + half * rule.nodes[i];
            const double wt = half * rule.weights[i] * params.orientation_dist.pdf(theta);
            if (wt == 0.0) continue;
            s.profile.assign(links, theta);
            double inner = 0.0;
            for (std::size_t k = 0; k < s.l_nodes.size(); ++k) {
                inner += s.l_weights[k] * s.profile.area(s.l_nodes[k]);
            }
            acc += wt * inner;
        }
    }
    return params.lambda * acc;
}

}  // namespace detail

double expected_k(std::span<const Link> links, const ScenarioParams& params,
                  const QuadratureSpec& quad) {
    if (links.empty()) throw std::invalid_argument("expected_k: empty link set");
    check_common_bs(links);
    params.validate();
    quad.validate();
    detail::EkScratch scratch;
    return detail::expected_k_scratch(links, params, quad, scratch);
}

double joint_los_prob(std::span<const Link> links, const ScenarioParams& params,
                      const QuadratureSpec& quad) {
    if (links.empty()) return 1.0;
    return clamp01(std::exp(-expected_k(links, params, quad)));
}

// ---------------------------------------------------------------------------
// ExpectedKEngine

ExpectedKEngine::ExpectedKEngine(std::vector<Link> links, const ScenarioParams& params,
                                 const QuadratureSpec& quad)
    : links_(std::move(links)), params_(params), quad_(quad) {
    params_.validate();
    quad_.validate();
    if (links_.size() > 64) {
        throw std::invalid_argument("ExpectedKEngine: at most 64 links supported");
    }
    if (!links_.empty()) check_common_bs(links_);
}

void ExpectedKEngine::set_query(const Link& y) {
    if (!links_.empty() && distance(y.a, links_.front().a) > kGeomEps) {
        throw std::invalid_argument("ExpectedKEngine: query link must share the BS endpoint");
    }
    query_ = y;
    has_query_ = true;
    query_memo_.clear();
}

double ExpectedKEngine::ek(std::uint64_t mask) {
    if (mask == 0) return 0.0;
    auto it = memo_.find(mask);
    if (it != memo_.end()) return it->second;
    const double value = compute(mask, false);
    memo_.emplace(mask, value);
    return value;
}

double ExpectedKEngine::ek_with_query(std::uint64_t mask) {
    if (!has_query_) throw std::logic_error("ExpectedKEngine: no query link set");
    auto it = query_memo_.find(mask);
    if (it != query_memo_.end()) return it->second;
    const double value = compute(mask, true);
    query_memo_.emplace(mask, value);
    return value;
}

double ExpectedKEngine::compute(std::uint64_t mask, bool with_query) {
    subset_.clear();
    for (std::size_t i = 0; i < links_.size(); ++i) {
        if (mask & (std::uint64_t{1} << i)) subset_.push_back(links_[i]);
    }
    if (with_query) subset_.push_back(query_);
    if (subset_.empty()) return 0.0;
    ++evaluations_;
    return detail::expected_k_scratch(subset_, params_, quad_, scratch_);
}

// ---------------------------------------------------------------------------
// Joint probabilities

namespace {

std::vector<Link> links_from_origin(std::span<const Point2D> a, std::span<const Point2D> b) {
    std::vector<Link> links;
    links.reserve(a.size() + b.size());
    for (const Point2D& p : a) links.push_back(Link{{0.0, 0.0}, p});
    for (const Point2D& p : b) links.push_back(Link{{0.0, 0.0}, p});
    return links;
}

}  // namespace

double joint_event_prob(std::span<const Point2D> los_points,
                        std::span<const Point2D> nlos_points, const ScenarioParams& params,
                        const QuadratureSpec& quad, int point_cap) {
    const int w = static_cast<int>(los_points.size());
    const int m = static_cast<int>(nlos_points.size());
    const int total = w + m;
    if (total > point_cap || total > 62) {
        throw CombinatorialBlowupError(
            "joint_event_prob: combinatorial blow-up, " + std::to_string(total) +
            " points exceed the cap of " + std::to_string(point_cap) +
            "; use the k-nearest-angular-neighbor predictor (kN-MAP) instead");
    }
    if (total == 0) return 1.0;

    ExpectedKEngine engine(links_from_origin(los_points, nlos_points), params, quad);
    const std::uint64_t w_mask = w == 0 ? 0 : ((std::uint64_t{1} << w) - 1);
    const double p_w = std::exp(-engine.ek(w_mask));
    if (m == 0) return clamp01(p_w);
    if (p_w <= 0.0) return 0.0;  // the all-LOS prefix is already impossible

    // P = p_w * (1 - sum_k (-1)^(k+1) S_k); each S_k term is a ratio of
    // joint-LOS probabilities. Alternating terms cancel, so the sum is
    // compensated and the result clamped afterwards.
    KahanSum alternating;
    for (int k = 1; k <= m; ++k) {
        const double sign = (k % 2 == 1) ? 1.0 : -1.0;
        std::uint64_t sub = (std::uint64_t{1} << k) - 1;
        const std::uint64_t limit = std::uint64_t{1} << m;
        while (sub < limit) {
            const std::uint64_t mask = w_mask | (sub << w);
            alternating.add(sign * std::exp(-engine.ek(mask)) / p_w);
            // Gosper's hack: next subset of the same size.
            const std::uint64_t c = sub & (~sub + 1);
            const std::uint64_t r = sub + c;
            sub = (((r ^ sub) >> 2) / c) | r;
        }
    }
    return clamp01(p_w * (1.0 - alternating.value()));
}

double conditional_los_prob(std::span<const Link> target, std::span<const Link> given_los,
                            const ScenarioParams& params, const QuadratureSpec& quad) {
    if (target.empty()) return 1.0;
    const double e_given =
        given_los.empty() ? 0.0 : expected_k(given_los, params, quad);
    std::vector<Link> combined(given_los.begin(), given_los.end());
    combined.insert(combined.end(), target.begin(), target.end());
    const double e_combined = expected_k(combined, params, quad);
    return clamp01(std::exp(e_given - e_combined));
}

Layout sample_layout(const ScenarioParams& params, std::uint64_t seed) {
    params.validate();
    RandomStream rng(seed);
    const double r_buf = params.radius + 0.5 * params.length_dist.upper();
    const long count = rng.poisson(params.lambda * kPi * r_buf * r_buf);
    Layout layout;
    layout.provenance = Provenance::Sampled;
    layout.obstacles.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        const Point2D center = rng.point_in_disk(r_buf);
        const double length = params.length_dist.quantile(rng.uniform());
        const double theta = params.orientation_dist.quantile(rng.uniform());
        layout.obstacles.emplace_back(center, length, theta);
    }
    return layout;
}

double pairwise_independence_error(double d, double theta0, const ScenarioParams& params,
                                   const QuadratureSpec& quad) {
    if (!(d > 0.0)) throw std::invalid_argument("pairwise_independence_error: d must be > 0");
    if (!(theta0 > 0.0) || theta0 > kPi + kGeomEps) {
        throw std::invalid_argument("pairwise_independence_error: theta0 must be in (0, pi]");
    }
    const double half = 0.5 * theta0;
    const Link l1{{0.0, 0.0}, {d * std::cos(-half), d * std::sin(-half)}};
    const Link l2{{0.0, 0.0}, {d * std::cos(half), d * std::sin(half)}};
    const std::array<Link, 2> both{l1, l2};
    const double e1 = expected_k(std::span<const Link>(&both[0], 1), params, quad);
    const double e2 = expected_k(std::span<const Link>(&both[1], 1), params, quad);
    const double e12 = expected_k(both, params, quad);
    const double unconditional = std::exp(-e1);
    const double conditional = std::exp(e2 - e12);  // P(LOS1 | LOS2)
    return std::abs(conditional - unconditional) / unconditional;
}

}  // namespace losmap
