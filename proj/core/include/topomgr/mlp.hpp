#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topomgr/models.hpp"
#include "topomgr/rng.hpp"

namespace topomgr {
namespace ml {

// Full-batch softmax cross-entropy objective for a tanh MLP, with L2 on
// the weight matrices (biases unpenalized):
//   J(theta) = mean_i CE(softmax(f(x_i)), y_i) + l2/(2n) * sum ||W_l||^2
// Exposed so the analytic gradient can be checked against central finite
// differences of loss().
struct MlpProblem {
  std::vector<int> layers;  // input, hidden..., output
  const double* x = nullptr;
  const int* y = nullptr;  // class indices
  std::size_t n = 0;
  double l2 = 0.0;

  std::size_t theta_size() const;
  double loss(std::span<const double> theta) const;
  double loss_grad(std::span<const double> theta, std::span<double> grad) const;
};

// Seeded Xavier init, then L-BFGS (two-loop recursion, backtracking
// Armijo line search) until the iteration cap or |loss delta| < tolerance.
MlpParams fit_mlp(const MlpHyper& hyper, int n_inputs, int n_classes,
                  const double* x, const int* y, std::size_t n, Rng& rng);

// Forward pass producing softmax probabilities.
void mlp_forward(const MlpParams& params, std::span<const double> input,
                 std::span<double> probs);

}  // namespace ml
}  // namespace topomgr
