#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topomgr/models.hpp"
#include "topomgr/rng.hpp"

namespace topomgr {
namespace ml {

// Gini-impurity classification tree over a row subset (the forest passes
// bootstrap indices). feature_subset > 0 samples that many candidate
// features per split, the forest's sqrt-feature rule.
struct ClassTreeConfig {
  int max_depth = 7;
  int min_samples_split = 2;
  int feature_subset = 0;  // 0 = consider every feature
  int n_classes = 2;
};

Tree build_classification_tree(const double* x, std::size_t n_features,
                               std::span<const std::size_t> rows,
                               std::span<const int> y,
                               const ClassTreeConfig& cfg, Rng& rng);

// Second-order regression tree on (gradient, hessian) pairs with Newton
// leaf values -G/(H+lambda). Feature columns are argsorted once at
// construction and reused across every tree of a boosting fit.
struct GradTreeConfig {
  int max_depth = 6;
  double lambda = 1.0;
  double min_child_weight = 1e-3;
};

class GradientTreeBuilder {
 public:
  GradientTreeBuilder(const double* x, std::size_t n_rows,
                      std::size_t n_features, GradTreeConfig cfg);

  Tree fit(std::span<const double> grad, std::span<const double> hess);

 private:
  const double* x_;
  std::size_t n_rows_;
  std::size_t n_features_;
  GradTreeConfig cfg_;
  std::vector<std::vector<std::size_t>> sorted_;  // per feature, rows by value
};

}  // namespace ml
}  // namespace topomgr
