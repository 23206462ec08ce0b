#pragma once

#include <vector>

namespace losmap {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Returns the n-point Gauss-Legendre rule, computed on first use and cached
/// per thread.
const GaussRule& gauss_legendre(int n);

}  // namespace losmap
