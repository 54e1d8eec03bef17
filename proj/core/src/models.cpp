#include "topomgr/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "topomgr/forest.hpp"
#include "topomgr/gbt.hpp"
#include "topomgr/mlp.hpp"
#include "topomgr/provenance.hpp"

namespace topomgr {
namespace ml {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Forest: return "forest";
    case ModelKind::Gbt: return "gbt";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "forest") return ModelKind::Forest;
  if (s == "gbt") return ModelKind::Gbt;
  throw ConfigError("unknown model kind: " + s);
}

HyperConfig HyperConfig::defaults(ModelKind kind, Scenario scenario) {
  HyperConfig cfg;
  cfg.kind = kind;
  if (kind == ModelKind::Gbt && scenario == Scenario::B) {
    cfg.gbt.n_trees = 20;
    cfg.gbt.max_depth = 2;
  }
  return cfg;
}

std::string HyperConfig::describe() const {
  std::ostringstream ss;
  switch (kind) {
    case ModelKind::Mlp: {
      ss << "mlp(";
      for (std::size_t i = 0; i < mlp.hidden_sizes.size(); ++i)
        ss << (i ? "," : "") << mlp.hidden_sizes[i];
      ss << ")l2=" << mlp.l2;
      break;
    }
    case ModelKind::Forest:
      ss << "forest(n=" << forest.n_trees << ",d=" << forest.max_depth << ")";
      break;
    case ModelKind::Gbt:
      ss << "gbt(n=" << gbt.n_trees << ",d=" << gbt.max_depth
         << ",lr=" << gbt.learning_rate << ")";
      break;
  }
  return ss.str();
}

Standardizer Standardizer::fit(const data::Dataset& ds) {
  const std::size_t f = ds.n_features(), n = ds.n_rows();
  Standardizer s;
  s.mean.assign(f, 0.0);
  s.std_dev.assign(f, 1.0);
  if (n == 0) return s;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.row(i);
    for (std::size_t k = 0; k < f; ++k) s.mean[k] += row[k];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(f, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.row(i);
    for (std::size_t k = 0; k < f; ++k) {
      const double d = row[k] - s.mean[k];
      var[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < f; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(n));
    s.std_dev[k] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> in,
                         std::span<double> out) const {
  for (std::size_t k = 0; k < in.size(); ++k)
    out[k] = (in[k] - mean[k]) / std_dev[k];
}

TrainedModel train(ModelKind kind, const data::Dataset& train_data,
                   const HyperConfig& hyper, std::uint64_t seed) {
  const std::size_t n = train_data.n_rows();
  const std::size_t f = train_data.n_features();
  if (n == 0 || f == 0) throw DataError("empty training data");
  for (double v : train_data.features)
    if (!std::isfinite(v)) throw DataError("non-finite feature");

  std::set<int> class_set(train_data.labels.begin(), train_data.labels.end());
  if (class_set.size() < 2) throw DataError("single-class data");

  TrainedModel model;
  model.kind = kind;
  model.hyper = hyper;
  model.hyper.kind = kind;
  model.feature_schema = train_data.feature_names;
  model.classes.assign(class_set.begin(), class_set.end());
  model.standardizer = Standardizer::fit(train_data);
  model.seed = seed;
  model.window = data::window_of(train_data.feature_names);
  model.data_digest = train_data.provenance.config_digest;

  std::vector<double> x(n * f);
  for (std::size_t i = 0; i < n; ++i)
    model.standardizer.apply(train_data.row(i), {x.data() + i * f, f});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(model.classes.begin(), model.classes.end(),
                                     train_data.labels[i]);
    y[i] = static_cast<int>(it - model.classes.begin());
  }
  const int k = static_cast<int>(model.classes.size());

  Rng rng(Rng::mix(seed, 0x6d6f64656cULL));
  const auto t0 = std::chrono::steady_clock::now();
  switch (kind) {
    case ModelKind::Mlp:
      model.mlp = fit_mlp(hyper.mlp, static_cast<int>(f), k, x.data(), y.data(), n, rng);
      break;
    case ModelKind::Forest:
      model.forest = fit_forest(hyper.forest, x.data(), y.data(), n, f, k, rng);
      break;
    case ModelKind::Gbt:
      model.gbt = fit_gbt(hyper.gbt, x.data(), y.data(), n, f, k).params;
      break;
  }
  const auto t1 = std::chrono::steady_clock::now();
  model.training_time_s = std::chrono::duration<double>(t1 - t0).count();
  return model;
}

Prediction TrainedModel::predict(std::span<const double> features) const {
  if (features.size() != feature_schema.size())
    throw DataError("feature vector does not match model schema");
  const std::size_t f = features.size();
  const int k = static_cast<int>(classes.size());

  double zbuf[256];
  std::vector<double> zheap;
  std::span<double> z;
  if (f <= 256) {
    z = {zbuf, f};
  } else {
    zheap.resize(f);
    z = zheap;
  }
  standardizer.apply(features, z);

  Prediction pred;
  pred.scores.assign(k, 0.0);
  switch (kind) {
    case ModelKind::Mlp:
      mlp_forward(mlp, z, pred.scores);
      break;
    case ModelKind::Forest: {
      for (const auto& tree : forest.trees) {
        const int c = static_cast<int>(tree.predict(z));
        pred.scores[std::clamp(c, 0, k - 1)] += 1.0;
      }
      const double total = static_cast<double>(forest.trees.size());
      for (double& s : pred.scores) s /= total;
      break;
    }
    case ModelKind::Gbt: {
      for (const auto& round : gbt.rounds)
        for (int c = 0; c < k; ++c)
          pred.scores[c] += gbt.learning_rate * round[c].predict(z);
      const double m = *std::max_element(pred.scores.begin(), pred.scores.end());
      double sum = 0.0;
      for (double& s : pred.scores) {
        s = std::exp(s - m);
        sum += s;
      }
      for (double& s : pred.scores) s /= sum;
      break;
    }
  }

  int best = 0;
  for (int c = 1; c < k; ++c)
    if (pred.scores[c] > pred.scores[best]) best = c;  // tie: lowest index
  pred.label = classes[best];
  return pred;
}

std::string TrainedModel::id() const {
  return to_string(kind) + "-" + fnv1a_hex(hyper.describe()).substr(0, 6);
}

}  // namespace ml
}  // namespace topomgr
