#include "topomgr/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace topomgr {
namespace ml {

double Tree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0)
    i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].value;
}

int Tree::depth() const {
  // iterative: depth of node 0
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    if (nodes[i].feature < 0) {
      best = std::max(best, d);
      continue;
    }
    stack.push_back({nodes[i].left, d + 1});
    stack.push_back({nodes[i].right, d + 1});
  }
  return best;
}

// ---------------------------------------------------------------------------
// Classification tree (Gini)

namespace {

double gini(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

int majority_class(const std::vector<std::size_t>& counts) {
  int best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k)
    if (counts[k] > counts[best]) best = static_cast<int>(k);  // tie: lowest
  return best;
}

struct ClassTreeCtx {
  const double* x;
  std::size_t n_features;
  std::span<const int> y;
  const ClassTreeConfig* cfg;
  Rng* rng;
  std::vector<TreeNode>* nodes;
};

int grow_class_node(ClassTreeCtx& ctx, std::vector<std::size_t>& rows,
                    int depth) {
  const auto& cfg = *ctx.cfg;
  std::vector<std::size_t> counts(cfg.n_classes, 0);
  for (std::size_t r : rows) counts[ctx.y[r]]++;

  const int node_id = static_cast<int>(ctx.nodes->size());
  ctx.nodes->push_back({});

  const double parent_gini = gini(counts, rows.size());
  const bool splittable =
      depth < cfg.max_depth &&
      rows.size() >= static_cast<std::size_t>(cfg.min_samples_split) &&
      parent_gini > 0.0;
  if (!splittable) {
    (*ctx.nodes)[node_id].value = majority_class(counts);
    return node_id;
  }

  // Candidate features: a seeded random draw of feature_subset features,
  // where features constant at this node do not consume the budget (the
  // usual random-forest rule; keeps informative features reachable).
  std::vector<std::size_t> feats(ctx.n_features);
  std::iota(feats.begin(), feats.end(), 0);
  const std::size_t cap =
      cfg.feature_subset > 0
          ? std::min<std::size_t>(cfg.feature_subset, ctx.n_features)
          : ctx.n_features;

  const double n = static_cast<double>(rows.size());
  double best_gain = 1e-12;
  std::size_t best_feature = 0;
  double best_threshold = 0.0;

  std::vector<std::pair<double, int>> vals;
  std::vector<std::size_t> left_counts(cfg.n_classes);
  std::size_t considered = 0;
  for (std::size_t ci = 0; ci < ctx.n_features && considered < cap; ++ci) {
    const std::size_t j = ci + ctx.rng->uniform_int(ctx.n_features - ci);
    std::swap(feats[ci], feats[j]);
    const std::size_t f = feats[ci];
    vals.clear();
    for (std::size_t r : rows) vals.push_back({ctx.x[r * ctx.n_features + f], ctx.y[r]});
    std::sort(vals.begin(), vals.end());
    if (vals.front().first == vals.back().first) continue;  // constant here
    ++considered;
    std::fill(left_counts.begin(), left_counts.end(), 0);
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      left_counts[vals[i].second]++;
      if (vals[i].first == vals[i + 1].first) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = vals.size() - nl;
      double gl = 0.0, gr = 0.0;
      {
        double sl = 0.0, sr = 0.0;
        for (std::size_t k = 0; k < left_counts.size(); ++k) {
          const double pl = static_cast<double>(left_counts[k]) / static_cast<double>(nl);
          const double pr = static_cast<double>(counts[k] - left_counts[k]) /
                            static_cast<double>(nr);
          sl += pl * pl;
          sr += pr * pr;
        }
        gl = 1.0 - sl;
        gr = 1.0 - sr;
      }
      const double gain =
          parent_gini - (static_cast<double>(nl) * gl + static_cast<double>(nr) * gr) / n;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
        best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
      }
    }
  }

  if (best_gain <= 1e-12) {
    (*ctx.nodes)[node_id].value = majority_class(counts);
    return node_id;
  }

  std::vector<std::size_t> left_rows, right_rows;
  for (std::size_t r : rows) {
    if (ctx.x[r * ctx.n_features + best_feature] < best_threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  if (left_rows.empty() || right_rows.empty()) {
    (*ctx.nodes)[node_id].value = majority_class(counts);
    return node_id;
  }
  rows.clear();
  rows.shrink_to_fit();

  const int left_id = grow_class_node(ctx, left_rows, depth + 1);
  const int right_id = grow_class_node(ctx, right_rows, depth + 1);
  auto& node = (*ctx.nodes)[node_id];
  node.feature = static_cast<int>(best_feature);
  node.threshold = best_threshold;
  node.left = left_id;
  node.right = right_id;
  return node_id;
}

}  // namespace

Tree build_classification_tree(const double* x, std::size_t n_features,
                               std::span<const std::size_t> rows,
                               std::span<const int> y,
                               const ClassTreeConfig& cfg, Rng& rng) {
  Tree tree;
  ClassTreeCtx ctx{x, n_features, y, &cfg, &rng, &tree.nodes};
  std::vector<std::size_t> all(rows.begin(), rows.end());
  grow_class_node(ctx, all, 0);
  return tree;
}

// ---------------------------------------------------------------------------
// Gradient regression tree with presorted columns

GradientTreeBuilder::GradientTreeBuilder(const double* x, std::size_t n_rows,
                                         std::size_t n_features,
                                         GradTreeConfig cfg)
    : x_(x), n_rows_(n_rows), n_features_(n_features), cfg_(cfg) {
  sorted_.resize(n_features_);
  for (std::size_t f = 0; f < n_features_; ++f) {
    auto& idx = sorted_[f];
    idx.resize(n_rows_);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return x_[a * n_features_ + f] < x_[b * n_features_ + f];
    });
  }
}

Tree GradientTreeBuilder::fit(std::span<const double> grad,
                              std::span<const double> hess) {
  struct NodeStats {
    double g = 0.0, h = 0.0;
    std::size_t count = 0;
    int node_id = -1;
    bool open = false;  // still a split candidate at the current level
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
  };

  Tree tree;
  std::vector<int> node_of(n_rows_, 0);

  std::vector<NodeStats> level(1);
  level[0].node_id = 0;
  level[0].open = true;
  tree.nodes.push_back({});
  for (std::size_t r = 0; r < n_rows_; ++r) {
    level[0].g += grad[r];
    level[0].h += hess[r];
    level[0].count++;
  }

  auto leaf_value = [&](double g, double h) { return -g / (h + cfg_.lambda); };
  auto score = [&](double g, double h) { return g * g / (h + cfg_.lambda); };

  struct Running {
    double g = 0.0, h = 0.0;
    std::size_t count = 0;
    double last_value = 0.0;
    bool has_last = false;
  };

  for (int depth = 0; depth < cfg_.max_depth; ++depth) {
    bool any_open = false;
    for (auto& st : level)
      if (st.open && st.count >= 2) any_open = true;
    if (!any_open) break;

    // Single pass per feature over the presorted column; per-node running
    // prefix stats give every candidate threshold of every open node.
    std::vector<Running> run(level.size());
    for (std::size_t f = 0; f < n_features_; ++f) {
      for (auto& r : run) r = Running{};
      for (std::size_t pos = 0; pos < n_rows_; ++pos) {
        const std::size_t row = sorted_[f][pos];
        const int slot = node_of[row];
        if (slot < 0) continue;
        auto& st = level[slot];
        if (!st.open) continue;
        auto& r = run[slot];
        const double v = x_[row * n_features_ + f];
        if (r.has_last && v != r.last_value && r.count > 0 &&
            r.count < st.count) {
          const double hl = r.h, hr = st.h - r.h;
          if (hl >= cfg_.min_child_weight && hr >= cfg_.min_child_weight) {
            const double gain = 0.5 * (score(r.g, hl) + score(st.g - r.g, hr) -
                                       score(st.g, st.h));
            if (gain > st.best_gain + 1e-12) {
              st.best_gain = gain;
              st.best_feature = static_cast<int>(f);
              st.best_threshold = 0.5 * (r.last_value + v);
            }
          }
        }
        r.g += grad[row];
        r.h += hess[row];
        r.count++;
        r.last_value = v;
        r.has_last = true;
      }
    }

    // materialize the chosen splits and re-slot rows for the next level
    std::vector<NodeStats> next;
    std::vector<int> slot_map(level.size() * 2, -1);
    bool any_split = false;
    for (std::size_t s = 0; s < level.size(); ++s) {
      auto& st = level[s];
      if (!st.open || st.best_feature < 0) {
        if (tree.nodes[st.node_id].feature < 0)
          tree.nodes[st.node_id].value = leaf_value(st.g, st.h);
        st.open = false;
        continue;
      }
      any_split = true;
      const int left_id = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      const int right_id = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      auto& node = tree.nodes[st.node_id];  // after growth: stable reference
      node.feature = st.best_feature;
      node.threshold = st.best_threshold;
      node.left = left_id;
      node.right = right_id;

      NodeStats l, r;
      l.node_id = node.left;
      r.node_id = node.right;
      l.open = r.open = true;
      slot_map[2 * s] = static_cast<int>(next.size());
      next.push_back(l);
      slot_map[2 * s + 1] = static_cast<int>(next.size());
      next.push_back(r);
    }
    if (!any_split) break;

    for (std::size_t row = 0; row < n_rows_; ++row) {
      const int slot = node_of[row];
      if (slot < 0 || !level[slot].open) {
        node_of[row] = -1;
        continue;
      }
      const auto& st = level[slot];
      const auto& node = tree.nodes[st.node_id];
      const bool left = x_[row * n_features_ + node.feature] < node.threshold;
      const int ns = slot_map[2 * slot + (left ? 0 : 1)];
      node_of[row] = ns;
      auto& dst = next[ns];
      dst.g += grad[row];
      dst.h += hess[row];
      dst.count++;
    }
    level = std::move(next);
  }

  // whatever is still open at the depth cap becomes a leaf
  for (const auto& st : level) {
    auto& node = tree.nodes[st.node_id];
    if (node.feature < 0) node.value = leaf_value(st.g, st.h);
  }
  return tree;
}

}  // namespace ml
}  // namespace topomgr
