#include "topomgr/gbt.hpp"

#include <algorithm>
#include <cmath>

#include "topomgr/tree.hpp"

namespace topomgr {
namespace ml {

namespace {

double multiclass_ce(const std::vector<double>& scores, const int* y,
                     std::size_t n, int k) {
  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.data() + i * k;
    const double m = *std::max_element(row, row + k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(row[c] - m);
    ce += std::log(sum) - (row[y[i]] - m);
  }
  return ce / static_cast<double>(n);
}

}  // namespace

GbtFit fit_gbt(const GbtHyper& hyper, const double* x, const int* y_idx,
               std::size_t n, std::size_t n_features, int n_classes) {
  GradTreeConfig tree_cfg;
  tree_cfg.max_depth = hyper.max_depth;
  GradientTreeBuilder builder(x, n, n_features, tree_cfg);

  const int k = n_classes;
  std::vector<double> scores(n * k, 0.0);
  std::vector<double> probs(k);
  std::vector<double> grad(n), hess(n);

  GbtFit fit;
  fit.params.learning_rate = hyper.learning_rate;
  fit.round_losses.push_back(multiclass_ce(scores, y_idx, n, k));

  for (int round = 0; round < hyper.n_trees; ++round) {
    std::vector<Tree> round_trees;
    round_trees.reserve(k);
    for (int c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = scores.data() + i * k;
        const double m = *std::max_element(row, row + k);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
          probs[j] = std::exp(row[j] - m);
          sum += probs[j];
        }
        const double p = probs[c] / sum;
        grad[i] = p - (y_idx[i] == c ? 1.0 : 0.0);
        hess[i] = std::max(p * (1.0 - p), 1e-16);
      }
      Tree tree = builder.fit(grad, hess);
      for (std::size_t i = 0; i < n; ++i)
        scores[i * k + c] +=
            hyper.learning_rate * tree.predict({x + i * n_features, n_features});
      round_trees.push_back(std::move(tree));
    }
    fit.params.rounds.push_back(std::move(round_trees));
    fit.round_losses.push_back(multiclass_ce(scores, y_idx, n, k));
  }
  return fit;
}

}  // namespace ml
}  // namespace topomgr
