#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "losmap/geometry.hpp"

namespace losmap {

/// Thrown when an exact inclusion-exclusion expansion would need more terms
/// than the configured point cap allows (2^(M-W) subsets). Callers that hit
/// this should switch to the k-nearest-angular-neighbor predictor.
class CombinatorialBlowupError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Probability distribution descriptor for obstacle lengths/orientations.
/// Either uniform on (lo, hi) or a piecewise-linear tabulated density.
class DistributionSpec {
  public:
    static DistributionSpec uniform(double lo, double hi);
    /// Piecewise-linear density on strictly ascending knots. Must integrate
    /// to 1 within 1e-6 (checked by validate()).
    static DistributionSpec tabulated(std::vector<double> knots, std::vector<double> density);

    double lower() const { return lo_; }
    double upper() const { return hi_; }
    bool is_uniform() const { return uniform_; }

    double pdf(double x) const;
    double mean() const;
    /// Inverse CDF; u in [0, 1).
    double quantile(double u) const;
    void validate() const;

  private:
    DistributionSpec() = default;
    bool uniform_ = true;
    double lo_ = 0.0;
    double hi_ = 1.0;
    std::vector<double> knots_;
    std::vector<double> density_;
    std::vector<double> cdf_;  // at knots
};

/// Single-cell scenario model: disk radius, blockage density, and the
/// length/orientation distributions of the obstacle process.
struct ScenarioParams {
    double radius = 150.0;  // m
    double lambda = 0.0;    // m^-2
    DistributionSpec length_dist = DistributionSpec::uniform(0.0, 20.0);
    DistributionSpec orientation_dist = DistributionSpec::uniform(0.0, kPi);

    void validate() const;
};

enum class Provenance { Sampled, Ingested };

/// A concrete obstacle set, the ground-truth world for a scenario.
struct Layout {
    std::vector<ObstacleSegment> obstacles;
    Provenance provenance = Provenance::Sampled;
};

inline int is_los(const Layout& layout, Point2D bs, Point2D x) {
    return is_los(std::span<const ObstacleSegment>(layout.obstacles), bs, x);
}

/// Tensor Gauss-Legendre grid for the (l, theta) blockage integral. The
/// theta count is nominal: nodes are distributed over panels split at the
/// link-azimuth kinks of |sin(theta - phi_j)| (at least 4 per panel), which
/// restores spectral convergence that a single rule loses at the kinks.
struct QuadratureSpec {
    int nodes_l = 32;
    int nodes_theta = 64;

    void validate() const;
};

inline constexpr int kDefaultPointCap = 20;

/// Expected number of obstacles blocking at least one of the given links,
/// all sharing the BS endpoint. Deterministic for a fixed spec.
double expected_k(std::span<const Link> links, const ScenarioParams& params,
                  const QuadratureSpec& quad);

/// P(all links simultaneously in LOS) = exp(-expected_k). Empty set -> 1.
double joint_los_prob(std::span<const Link> links, const ScenarioParams& params,
                      const QuadratureSpec& quad);

/// Joint probability that every point in `los_points` is in LOS and every
/// point in `nlos_points` is in NLOS, with the BS at the origin. Exact
/// inclusion-exclusion over the NLOS set; throws CombinatorialBlowupError
/// when the total point count exceeds `point_cap`.
double joint_event_prob(std::span<const Point2D> los_points,
                        std::span<const Point2D> nlos_points, const ScenarioParams& params,
                        const QuadratureSpec& quad, int point_cap = kDefaultPointCap);

/// P(all target links LOS | all given links LOS), the exp(E[K]) ratio.
double conditional_los_prob(std::span<const Link> target, std::span<const Link> given_los,
                            const ScenarioParams& params, const QuadratureSpec& quad);

/// Draws one obstacle layout: Poisson count over the buffered disk of radius
/// R + sup(L)/2 (centers slightly outside the cell can still block in-cell
/// links), centers uniform, lengths/orientations i.i.d. Reproducible per seed.
Layout sample_layout(const ScenarioParams& params, std::uint64_t seed);

/// Relative error |P(LOS1|LOS2) - P(LOS1)| / P(LOS1) for two points at
/// distance d from the BS separated by the angle theta0.
double pairwise_independence_error(double d, double theta0, const ScenarioParams& params,
                                   const QuadratureSpec& quad);

namespace detail {

/// Reusable buffers for repeated expected_k evaluations.
struct EkScratch {
    std::vector<double> l_nodes, l_weights;
    bool l_ready = false;
    std::vector<double> kinks;
    BlockingUnionProfile profile;
};

/// expected_k without per-call validation or allocation; inputs must already
/// satisfy the public preconditions. l_ready caches the length nodes, which
/// only depend on (params.length_dist, quad).
double expected_k_scratch(std::span<const Link> links, const ScenarioParams& params,
                          const QuadratureSpec& quad, EkScratch& scratch);

}  // namespace detail

/// Memoizing E[K] evaluator over subsets of a fixed link set (all sharing the
/// BS), keyed by index bitmask, plus one query link that can be swapped
/// without discarding the fixed-set cache. This is the workhorse behind the
/// Bayesian predictors: inclusion-exclusion terms share subsets heavily.
class ExpectedKEngine {
  public:
    ExpectedKEngine(std::vector<Link> links, const ScenarioParams& params,
                    const QuadratureSpec& quad);

    std::size_t size() const { return links_.size(); }
    const Link& link(std::size_t i) const { return links_[i]; }
    const ScenarioParams& params() const { return params_; }
    const QuadratureSpec& quadrature() const { return quad_; }

    /// E[K] of the masked subset of the fixed links. ek(0) == 0.
    double ek(std::uint64_t mask);

    /// Installs the query link and clears the query-side memo.
    void set_query(const Link& y);

    /// E[K] of the masked subset united with the current query link.
    double ek_with_query(std::uint64_t mask);

    /// Number of quadrature evaluations performed (cache misses).
    std::uint64_t evaluations() const { return evaluations_; }

  private:
    double compute(std::uint64_t mask, bool with_query);

    std::vector<Link> links_;
    ScenarioParams params_;
    QuadratureSpec quad_;
    Link query_{};
    bool has_query_ = false;
    std::unordered_map<std::uint64_t, double> memo_;
    std::unordered_map<std::uint64_t, double> query_memo_;
    std::uint64_t evaluations_ = 0;

    std::vector<Link> subset_;  // reusable gather buffer
    detail::EkScratch scratch_;
};

/// Compensated (Kahan) accumulator for alternating inclusion-exclusion sums.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

}  // namespace losmap
