#include "topomgr/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace topomgr {
namespace ml {

namespace {

// theta layout: per layer, weights (out x in, row-major) then biases (out)
std::size_t layer_theta_size(const std::vector<int>& layers) {
  std::size_t s = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l)
    s += static_cast<std::size_t>(layers[l + 1]) * layers[l] + layers[l + 1];
  return s;
}

struct Views {
  std::vector<const double*> w;
  std::vector<const double*> b;
};

Views make_views(const std::vector<int>& layers, const double* theta) {
  Views v;
  const double* p = theta;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    v.w.push_back(p);
    p += static_cast<std::size_t>(layers[l + 1]) * layers[l];
    v.b.push_back(p);
    p += layers[l + 1];
  }
  return v;
}

void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

std::size_t MlpProblem::theta_size() const { return layer_theta_size(layers); }

double MlpProblem::loss(std::span<const double> theta) const {
  const Views v = make_views(layers, theta.data());
  const std::size_t depth = layers.size() - 1;
  const int max_w = *std::max_element(layers.begin(), layers.end());
  std::vector<double> act(max_w), next(max_w);

  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = x + i * layers[0];
    std::copy(in, in + layers[0], act.begin());
    for (std::size_t l = 0; l < depth; ++l) {
      const int rows = layers[l + 1], cols = layers[l];
      for (int r = 0; r < rows; ++r) {
        double s = v.b[l][r];
        const double* wr = v.w[l] + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) s += wr[c] * act[c];
        next[r] = l + 1 < depth ? std::tanh(s) : s;
      }
      std::swap(act, next);
    }
    std::span<double> logits(act.data(), layers.back());
    softmax_inplace(logits);
    ce -= std::log(std::max(logits[y[i]], 1e-300));
  }
  ce /= static_cast<double>(n);

  double reg = 0.0;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t cnt = static_cast<std::size_t>(layers[l + 1]) * layers[l];
    for (std::size_t k = 0; k < cnt; ++k) reg += v.w[l][k] * v.w[l][k];
  }
  return ce + 0.5 * l2 * reg / static_cast<double>(n);
}

double MlpProblem::loss_grad(std::span<const double> theta,
                             std::span<double> grad) const {
  const Views v = make_views(layers, theta.data());
  const std::size_t depth = layers.size() - 1;
  std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<double*> gw(depth), gb(depth);
  {
    double* p = grad.data();
    for (std::size_t l = 0; l < depth; ++l) {
      gw[l] = p;
      p += static_cast<std::size_t>(layers[l + 1]) * layers[l];
      gb[l] = p;
      p += layers[l + 1];
    }
  }

  // per-sample activations for backprop
  std::vector<std::vector<double>> acts(depth + 1);
  for (std::size_t l = 0; l <= depth; ++l) acts[l].resize(layers[l]);
  const int max_w = *std::max_element(layers.begin(), layers.end());
  std::vector<double> delta(max_w), delta_prev(max_w);

  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = x + i * layers[0];
    std::copy(in, in + layers[0], acts[0].begin());
    for (std::size_t l = 0; l < depth; ++l) {
      const int rows = layers[l + 1], cols = layers[l];
      for (int r = 0; r < rows; ++r) {
        double s = v.b[l][r];
        const double* wr = v.w[l] + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) s += wr[c] * acts[l][c];
        acts[l + 1][r] = l + 1 < depth ? std::tanh(s) : s;
      }
    }
    std::vector<double>& out = acts[depth];
    std::vector<double> probs(out.begin(), out.end());
    softmax_inplace(probs);
    ce -= std::log(std::max(probs[y[i]], 1e-300));

    for (int k = 0; k < layers.back(); ++k)
      delta[k] = probs[k] - (k == y[i] ? 1.0 : 0.0);

    for (std::size_t l = depth; l-- > 0;) {
      const int rows = layers[l + 1], cols = layers[l];
      for (int r = 0; r < rows; ++r) {
        double* gwr = gw[l] + static_cast<std::size_t>(r) * cols;
        const double d = delta[r];
        for (int c = 0; c < cols; ++c) gwr[c] += d * acts[l][c];
        gb[l][r] += d;
      }
      if (l == 0) break;
      for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r)
          s += v.w[l][static_cast<std::size_t>(r) * cols + c] * delta[r];
        delta_prev[c] = s * (1.0 - acts[l][c] * acts[l][c]);  // tanh'
      }
      std::swap(delta, delta_prev);
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& g : grad) g *= inv_n;

  double reg = 0.0;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t cnt = static_cast<std::size_t>(layers[l + 1]) * layers[l];
    for (std::size_t k = 0; k < cnt; ++k) {
      reg += v.w[l][k] * v.w[l][k];
      gw[l][k] += l2 * v.w[l][k] * inv_n;
    }
  }
  return ce * inv_n + 0.5 * l2 * reg * inv_n;
}

namespace {

struct LbfgsPair {
  std::vector<double> s, y;
  double rho;
};

}  // namespace

MlpParams fit_mlp(const MlpHyper& hyper, int n_inputs, int n_classes,
                  const double* x, const int* y, std::size_t n, Rng& rng) {
  MlpProblem prob;
  prob.layers.push_back(n_inputs);
  for (int h : hyper.hidden_sizes) prob.layers.push_back(h);
  prob.layers.push_back(n_classes);
  prob.x = x;
  prob.y = y;
  prob.n = n;
  prob.l2 = hyper.l2;

  const std::size_t dim = prob.theta_size();
  std::vector<double> theta(dim);
  {
    // Xavier-uniform weights, zero biases
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < prob.layers.size(); ++l) {
      const int in = prob.layers[l], out = prob.layers[l + 1];
      const double bound = std::sqrt(6.0 / (in + out));
      for (int k = 0; k < out * in; ++k)
        theta[p++] = rng.uniform(-bound, bound);
      for (int k = 0; k < out; ++k) theta[p++] = 0.0;
    }
  }

  std::vector<double> grad(dim), new_grad(dim), direction(dim), trial(dim);
  double loss = prob.loss_grad(theta, grad);

  std::deque<LbfgsPair> history;
  const std::size_t memory = 8;
  std::vector<double> alpha(memory);

  for (int iter = 0; iter < hyper.max_iterations; ++iter) {
    // two-loop recursion
    std::copy(grad.begin(), grad.end(), direction.begin());
    int hi = static_cast<int>(history.size()) - 1;
    for (int k = hi; k >= 0; --k) {
      const auto& pair = history[k];
      double a = 0.0;
      for (std::size_t j = 0; j < dim; ++j) a += pair.s[j] * direction[j];
      a *= pair.rho;
      alpha[k] = a;
      for (std::size_t j = 0; j < dim; ++j) direction[j] -= a * pair.y[j];
    }
    if (!history.empty()) {
      const auto& last = history.back();
      double yy = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        yy += last.y[j] * last.y[j];
        sy += last.s[j] * last.y[j];
      }
      const double gamma = yy > 0.0 ? sy / yy : 1.0;
      for (double& d : direction) d *= gamma;
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& pair = history[k];
      double b = 0.0;
      for (std::size_t j = 0; j < dim; ++j) b += pair.y[j] * direction[j];
      b *= pair.rho;
      for (std::size_t j = 0; j < dim; ++j)
        direction[j] += (alpha[k] - b) * pair.s[j];
    }
    for (double& d : direction) d = -d;

    double dg = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dg += direction[j] * grad[j];
    if (dg >= 0.0) {  // not a descent direction; fall back to steepest
      for (std::size_t j = 0; j < dim; ++j) direction[j] = -grad[j];
      dg = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dg += direction[j] * grad[j];
      history.clear();
    }
    if (dg == 0.0) break;

    // backtracking Armijo
    double step = 1.0;
    if (iter == 0) {
      double gnorm = 0.0;
      for (double g : grad) gnorm += std::abs(g);
      step = std::min(1.0, 1.0 / std::max(gnorm, 1e-12));
    }
    const double c1 = 1e-4;
    double new_loss = loss;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t j = 0; j < dim; ++j)
        trial[j] = theta[j] + step * direction[j];
      new_loss = prob.loss(trial);
      if (std::isfinite(new_loss) && new_loss <= loss + c1 * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const double new_loss_g = prob.loss_grad(trial, new_grad);
    LbfgsPair pair;
    pair.s.resize(dim);
    pair.y.resize(dim);
    double sy = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      pair.s[j] = trial[j] - theta[j];
      pair.y[j] = new_grad[j] - grad[j];
      sy += pair.s[j] * pair.y[j];
    }
    if (sy > 1e-12) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > memory) history.pop_front();
    }

    theta.swap(trial);
    grad.swap(new_grad);
    const double delta = std::abs(loss - new_loss_g);
    loss = new_loss_g;
    if (delta < hyper.tolerance) break;
  }

  MlpParams params;
  params.layer_sizes = prob.layers;
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < prob.layers.size(); ++l) {
    const std::size_t wn =
        static_cast<std::size_t>(prob.layers[l + 1]) * prob.layers[l];
    params.weights.emplace_back(theta.begin() + p, theta.begin() + p + wn);
    p += wn;
    params.biases.emplace_back(theta.begin() + p,
                               theta.begin() + p + prob.layers[l + 1]);
    p += prob.layers[l + 1];
  }
  return params;
}

void mlp_forward(const MlpParams& params, std::span<const double> input,
                 std::span<double> probs) {
  const auto& layers = params.layer_sizes;
  const std::size_t depth = layers.size() - 1;
  const int max_w = *std::max_element(layers.begin(), layers.end());
  std::vector<double> act(input.begin(), input.end()), next(max_w);
  act.resize(max_w);
  for (std::size_t l = 0; l < depth; ++l) {
    const int rows = layers[l + 1], cols = layers[l];
    for (int r = 0; r < rows; ++r) {
      double s = params.biases[l][r];
      const double* wr = params.weights[l].data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) s += wr[c] * act[c];
      next[r] = l + 1 < depth ? std::tanh(s) : s;
    }
    std::swap(act, next);
  }
  std::span<double> logits(act.data(), layers.back());
  softmax_inplace(logits);
  std::copy(logits.begin(), logits.end(), probs.begin());
}

}  // namespace ml
}  // namespace topomgr
