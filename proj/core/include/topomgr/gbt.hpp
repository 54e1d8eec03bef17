#pragma once

#include <cstddef>
#include <vector>

#include "topomgr/models.hpp"

namespace topomgr {
namespace ml {

struct GbtFit {
  GbtParams params;
  // Multiclass cross-entropy on the training set: entry 0 before any
  // boosting, then one entry per round. Non-increasing by construction
  // of the Newton steps; asserted by the property tests.
  std::vector<double> round_losses;
};

// Per-round, per-class regression trees on softmax gradients with Newton
// leaf values, learning rate applied additively. No row or column
// subsampling, so the fit is deterministic without a seed.
GbtFit fit_gbt(const GbtHyper& hyper, const double* x, const int* y_idx,
               std::size_t n, std::size_t n_features, int n_classes);

}  // namespace ml
}  // namespace topomgr
