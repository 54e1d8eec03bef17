#include "topomgr/forest.hpp"

#include <cmath>

#include "topomgr/tree.hpp"

namespace topomgr {
namespace ml {

ForestParams fit_forest(const ForestHyper& hyper, const double* x,
                        const int* y_idx, std::size_t n,
                        std::size_t n_features, int n_classes, Rng& rng) {
  ClassTreeConfig cfg;
  cfg.max_depth = hyper.max_depth;
  cfg.n_classes = n_classes;
  cfg.feature_subset = std::max(
      1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_features)))));

  ForestParams params;
  params.trees.reserve(hyper.n_trees);
  std::span<const int> y(y_idx, n);
  for (int t = 0; t < hyper.n_trees; ++t) {
    Rng tree_rng = rng.child(static_cast<std::uint64_t>(t) + 1);
    std::vector<std::size_t> boot(n);
    for (auto& b : boot) b = tree_rng.uniform_int(n);
    params.trees.push_back(
        build_classification_tree(x, n_features, boot, y, cfg, tree_rng));
  }
  return params;
}

}  // namespace ml
}  // namespace topomgr
