#pragma once

#include <cstddef>

#include "topomgr/models.hpp"
#include "topomgr/rng.hpp"

namespace topomgr {
namespace ml {

// Bootstrap-sampled Gini trees with sqrt(n_features) candidates per
// split; majority vote, ties to the lowest class index.
ForestParams fit_forest(const ForestHyper& hyper, const double* x,
                        const int* y_idx, std::size_t n,
                        std::size_t n_features, int n_classes, Rng& rng);

}  // namespace ml
}  // namespace topomgr
