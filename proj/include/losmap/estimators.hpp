#pragma once

#include <limits>
#include <optional>
#include <string_view>

#include "losmap/blockage_model.hpp"

namespace losmap {

/// A labeled sample point: 1 = LOS, 0 = NLOS.
struct Measurement {
    Point2D position;
    int label = 0;
};

struct Prediction {
    int label = 0;
    /// P(y = 1 | data). Present for the Bayesian predictors (absent when a
    /// Bonferroni early exit decided the label from a bound alone), absent
    /// for the vote-based ones.
    std::optional<double> posterior;
    /// Inclusion-exclusion summands evaluated (diagnostic).
    std::uint64_t terms_evaluated = 0;
};

enum class EstimatorKind { Map, MapBonferroni, KnMap, Knn, Kns, ParzenGaussian, NaiveBayes };

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::KnMap;
    int k = 3;            // KnMap / Knn / Kns neighbor count
    double sigma = 1.8;   // m, ParzenGaussian window width
    std::size_t r_max = std::numeric_limits<std::size_t>::max();  // Bonferroni order cap
    QuadratureSpec quadrature{};
    /// Harness-level restriction: skip this estimator when the measurement
    /// count exceeds max_n (0 = unlimited).
    int max_n = 0;

    void validate() const;
};

const char* estimator_name(EstimatorKind kind);
std::optional<EstimatorKind> estimator_from_name(std::string_view name);

/// Exact Bayesian (MAP) prediction of the LOS state at y given the labeled
/// measurements, BS at the origin. Posterior via the full inclusion-exclusion
/// expansion; label 1 iff posterior > 1/2.
Prediction map_predict(std::span<const Measurement> data, Point2D y,
                       const ScenarioParams& params, const QuadratureSpec& quad);

/// Same decision as map_predict, but tries the Bonferroni partial-sum bounds
/// first: at odd order an upper bound can already prove label 1, at even
/// order a lower bound label 0. Falls back to the full expansion when the
/// bounds stay inconclusive up to r_max.
Prediction map_predict_bonferroni(std::span<const Measurement> data, Point2D y,
                                  const ScenarioParams& params, const QuadratureSpec& quad,
                                  std::size_t r_max = std::numeric_limits<std::size_t>::max());

/// MAP restricted to the k measurements nearest to y in azimuth as seen from
/// the BS (ties to the smaller index). k >= N degrades to exact MAP.
Prediction kn_map_predict(std::span<const Measurement> data, Point2D y,
                          const ScenarioParams& params, const QuadratureSpec& quad, int k);

/// Majority label among the k Euclidean-nearest measurements. Vote ties
/// resolve to NLOS, distance ties to the smaller index. k is clamped to N.
Prediction knn_predict(std::span<const Measurement> data, Point2D y, int k);

/// Nearest-segment vote: a LOS measurement contributes its BS-to-point
/// segment (surely LOS), an NLOS one the radial segment out to the cell
/// circle (surely NLOS). Majority over the k segments nearest to y.
Prediction kns_predict(std::span<const Measurement> data, Point2D y, int k, double radius);

/// Parzen window with Gaussian weights w_i = exp(-|y - x_i|^2 / (2 sigma^2));
/// label 1 iff the LOS weight sum strictly exceeds the NLOS one.
Prediction parzen_predict(std::span<const Measurement> data, Point2D y, double sigma);

/// Bayes with the measurements assumed mutually independent given nothing,
/// each still dependent on the state at y. Factors are exact two-point
/// conditionals; products accumulate in log space.
Prediction naive_bayes_predict(std::span<const Measurement> data, Point2D y,
                               const ScenarioParams& params, const QuadratureSpec& quad);

/// Dispatch on config.kind; vote-based estimators ignore the model.
Prediction predict_one(const EstimatorConfig& config, std::span<const Measurement> data,
                       Point2D y, const ScenarioParams& params);

/// Stateful Bayesian predictor over a fixed measurement set. E[K] values of
/// measurement-only subsets are query-independent and cached across queries,
/// which is the main cost saving when predicting a whole grid.
class BayesPredictor {
  public:
    BayesPredictor(std::vector<Measurement> data, const ScenarioParams& params,
                   const QuadratureSpec& quad, int point_cap = kDefaultPointCap);

    Prediction map(Point2D y);
    Prediction map_bonferroni(Point2D y,
                              std::size_t r_max = std::numeric_limits<std::size_t>::max());
    Prediction kn_map(Point2D y, int k);
    Prediction naive_bayes(Point2D y);

  private:
    struct SubsetSplit {
        std::uint64_t los_mask = 0;
        std::vector<int> nlos_indices;
    };

    Prediction map_on_subset(std::span<const int> subset, Point2D y, bool bonferroni,
                             std::size_t r_max);
    Prediction map_with_engine(ExpectedKEngine& engine, const SubsetSplit& split,
                               std::span<const int> labels_of, Point2D y, bool bonferroni,
                               std::size_t r_max);
    std::optional<Prediction> coincident_shortcut(std::span<const int> subset, Point2D y) const;

    std::vector<Measurement> data_;
    ScenarioParams params_;
    QuadratureSpec quad_;
    int point_cap_;
    std::optional<ExpectedKEngine> engine_;  // present when N <= 64
    std::vector<int> all_indices_;
    std::vector<int> selection_;             // scratch for kn_map
    std::vector<double> singles_;            // lazy E[K_i] cache for the N > 64 path
    detail::EkScratch scratch_;              // for the N > 64 path
};

}  // namespace losmap
