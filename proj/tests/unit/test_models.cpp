#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "topomgr/forest.hpp"
#include "topomgr/gbt.hpp"
#include "topomgr/mlp.hpp"
#include "topomgr/models.hpp"
#include "topomgr/tree.hpp"

using namespace topomgr;
using namespace topomgr::ml;

namespace {

// Two well-separated Gaussian blobs; linear separability is verified by
// the perceptron oracle below before any assertion relies on it.
data::Dataset blobs(std::size_t n_per_class, std::uint64_t seed,
                    Scenario scenario = Scenario::A) {
  data::Dataset ds;
  ds.scenario = scenario;
  ds.feature_names = data::scenario_feature_names(scenario);
  Rng rng(seed);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const int cls = static_cast<int>(i % 2);
    const double cx = cls == 0 ? -3.0 : 3.0;
    const double row[] = {cx + rng.normal(0, 0.5), cx + rng.normal(0, 0.5),
                          rng.normal(0, 0.5), rng.normal(0, 0.5)};
    ds.append_row(static_cast<std::int64_t>(i), row, cls);
  }
  return ds;
}

bool perceptron_separable(const data::Dataset& ds, int max_epochs = 200) {
  const std::size_t f = ds.n_features();
  std::vector<double> w(f + 1, 0.0);
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    bool clean = true;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
      const auto row = ds.row(i);
      double s = w[f];
      for (std::size_t k = 0; k < f; ++k) s += w[k] * row[k];
      const int target = ds.labels[i] == 0 ? -1 : 1;
      if (target * s <= 0) {
        clean = false;
        for (std::size_t k = 0; k < f; ++k) w[k] += target * row[k];
        w[f] += target;
      }
    }
    if (clean) return true;
  }
  return false;
}

data::Dataset random_dataset(std::size_t n, std::uint64_t seed, int n_classes = 4) {
  data::Dataset ds;
  ds.scenario = Scenario::A;
  ds.feature_names = data::scenario_feature_names(Scenario::A);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    const double row[] = {a, b, rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
    // label depends on the first two features so trees have something to learn
    const int label = (a > 0 ? 1 : 0) + (b > 0 ? 2 : 0);
    (void)n_classes;
    ds.append_row(static_cast<std::int64_t>(i), row, label);
  }
  return ds;
}

}  // namespace

TEST_CASE("mlp analytic gradient matches central finite differences") {
  Rng meta(101);
  for (int trial = 0; trial < 6; ++trial) {
    MlpProblem prob;
    const int n_in = 2 + static_cast<int>(meta.uniform_int(4));
    const int n_out = 2 + static_cast<int>(meta.uniform_int(3));
    const int n_hidden_layers = 1 + static_cast<int>(meta.uniform_int(3));
    prob.layers.push_back(n_in);
    for (int l = 0; l < n_hidden_layers; ++l)
      prob.layers.push_back(2 + static_cast<int>(meta.uniform_int(9)));
    prob.layers.push_back(n_out);
    prob.l2 = 1e-4;

    const std::size_t n = 12;
    std::vector<double> x(n * n_in);
    std::vector<int> y(n);
    for (auto& v : x) v = meta.uniform(-1.0, 1.0);
    for (auto& v : y) v = static_cast<int>(meta.uniform_int(n_out));
    prob.x = x.data();
    prob.y = y.data();
    prob.n = n;

    std::vector<double> theta(prob.theta_size());
    for (auto& t : theta) t = meta.uniform(-0.8, 0.8);

    std::vector<double> grad(theta.size());
    prob.loss_grad(theta, grad);

    const double eps = 1e-6;
    for (std::size_t k = 0; k < theta.size(); k += 3) {  // spot-check a third
      std::vector<double> tp = theta, tm = theta;
      tp[k] += eps;
      tm[k] -= eps;
      const double fd = (prob.loss(tp) - prob.loss(tm)) / (2 * eps);
      const double rel = std::abs(grad[k] - fd) /
                         std::max({1.0, std::abs(grad[k]), std::abs(fd)});
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("mlp fits linearly separable blobs to training accuracy 1.0") {
  const data::Dataset ds = blobs(60, 11);
  REQUIRE(perceptron_separable(ds));  // oracle for the premise
  HyperConfig cfg = HyperConfig::defaults(ModelKind::Mlp, Scenario::A);
  const TrainedModel model = train(ModelKind::Mlp, ds, cfg, 1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (model.predict(ds.row(i)).label == ds.labels[i]) ++correct;
  CHECK(correct == ds.n_rows());
}

TEST_CASE("train rejects degenerate inputs") {
  data::Dataset ds = blobs(20, 3);
  SUBCASE("single-class data") {
    for (auto& l : ds.labels) l = 1;
    CHECK_THROWS_WITH_AS(train(ModelKind::Forest, ds, HyperConfig{}, 1),
                         "single-class data", DataError);
  }
  SUBCASE("non-finite feature") {
    ds.features[5] = std::nan("");
    CHECK_THROWS_AS(train(ModelKind::Mlp, ds, HyperConfig{}, 1), DataError);
  }
}

TEST_CASE("forest honors tree count and depth caps") {
  const data::Dataset ds = random_dataset(400, 7);
  HyperConfig cfg;
  cfg.kind = ModelKind::Forest;
  cfg.forest.n_trees = 40;
  cfg.forest.max_depth = 7;
  const TrainedModel model = train(ModelKind::Forest, ds, cfg, 5);
  CHECK(model.forest.trees.size() == 40);
  for (const auto& tree : model.forest.trees) CHECK(tree.depth() <= 7);
}

TEST_CASE("single-tree forest equals direct tree traversal") {
  const data::Dataset ds = random_dataset(300, 13);
  HyperConfig cfg;
  cfg.kind = ModelKind::Forest;
  cfg.forest.n_trees = 1;
  cfg.forest.max_depth = 6;
  const TrainedModel model = train(ModelKind::Forest, ds, cfg, 9);
  REQUIRE(model.forest.trees.size() == 1);
  const Tree& tree = model.forest.trees[0];
  std::vector<double> z(ds.n_features());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    model.standardizer.apply(ds.row(i), z);
    // independent traversal oracle
    int node = 0;
    while (tree.nodes[node].feature >= 0) {
      const auto& nd = tree.nodes[node];
      node = z[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    const int direct = model.classes[static_cast<int>(tree.nodes[node].value)];
    CHECK(model.predict(ds.row(i)).label == direct);
  }
}

TEST_CASE("constant network predicts the favored class everywhere") {
  TrainedModel model;
  model.kind = ModelKind::Mlp;
  model.feature_schema = data::scenario_feature_names(Scenario::A);
  model.classes = {0, 1, 2, 3};
  model.standardizer.mean.assign(4, 0.0);
  model.standardizer.std_dev.assign(4, 1.0);
  model.mlp.layer_sizes = {4, 3, 4};
  model.mlp.weights = {std::vector<double>(12, 0.0), std::vector<double>(12, 0.0)};
  model.mlp.biases = {std::vector<double>(3, 0.0), {1.0, 0.0, 0.0, 0.0}};
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double row[] = {rng.uniform(-9, 9), rng.uniform(-9, 9),
                          rng.uniform(-9, 9), rng.uniform(-9, 9)};
    const Prediction p = model.predict(row);
    CHECK(p.label == 0);
    CHECK(std::abs(1.0 - (p.scores[0] + p.scores[1] + p.scores[2] + p.scores[3])) < 1e-12);
  }
}

TEST_CASE("prediction scores sum to 1 for every kind") {
  const data::Dataset ds = random_dataset(250, 21);
  Rng rng(3);
  for (ModelKind kind : {ModelKind::Mlp, ModelKind::Forest, ModelKind::Gbt}) {
    const TrainedModel model =
        train(kind, ds, HyperConfig::defaults(kind, Scenario::A), 4);
    for (int i = 0; i < 50; ++i) {
      const double row[] = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                            rng.uniform(0, 5), rng.uniform(0, 5)};
      const Prediction p = model.predict(row);
      double sum = 0.0;
      for (double s : p.scores) sum += s;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::find(model.classes.begin(), model.classes.end(), p.label) !=
            model.classes.end());
    }
  }
}

TEST_CASE("gbt training loss is non-increasing per boosting round") {
  const data::Dataset raw = random_dataset(500, 33);
  const Standardizer st = Standardizer::fit(raw);
  std::vector<double> x(raw.n_rows() * raw.n_features());
  for (std::size_t i = 0; i < raw.n_rows(); ++i)
    st.apply(raw.row(i), {x.data() + i * raw.n_features(), raw.n_features()});
  GbtHyper hyper;
  hyper.n_trees = 25;
  hyper.max_depth = 3;
  const GbtFit fit = fit_gbt(hyper, x.data(), raw.labels.data(), raw.n_rows(),
                             raw.n_features(), 4);
  REQUIRE(fit.round_losses.size() == 26);
  for (std::size_t r = 1; r < fit.round_losses.size(); ++r)
    CHECK(fit.round_losses[r] <= fit.round_losses[r - 1] + 1e-12);
}

TEST_CASE("tree ensembles are invariant under monotone feature transforms") {
  auto transform = [](const data::Dataset& ds, std::size_t col,
                      double (*g)(double)) {
    data::Dataset out = ds;
    for (std::size_t i = 0; i < out.n_rows(); ++i)
      out.features[i * out.n_features() + col] =
          g(out.features[i * out.n_features() + col]);
    return out;
  };
  const data::Dataset ds = random_dataset(300, 41);
  double (*cube)(double) = [](double v) { return v * v * v; };
  double (*expf_)(double) = [](double v) { return std::exp(v); };
  double (*negate)(double) = [](double v) { return -v; };

  for (ModelKind kind : {ModelKind::Forest, ModelKind::Gbt}) {
    HyperConfig cfg = HyperConfig::defaults(kind, Scenario::A);
    if (kind == ModelKind::Forest) cfg.forest.n_trees = 10;
    if (kind == ModelKind::Gbt) cfg.gbt.n_trees = 10;
    const TrainedModel base = train(kind, ds, cfg, 17);
    for (auto g : {cube, expf_, negate}) {
      for (std::size_t col : {std::size_t{0}, std::size_t{2}}) {
        const data::Dataset tds = transform(ds, col, g);
        const TrainedModel tmodel = train(kind, tds, cfg, 17);
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
          CHECK(tmodel.predict(tds.row(i)).label ==
                base.predict(ds.row(i)).label);
      }
    }
  }
}

TEST_CASE("standardization makes predict invariant to affine rescaling") {
  const data::Dataset ds = blobs(80, 55);
  auto rescale = [&](const data::Dataset& in) {
    data::Dataset out = in;
    const double scale[] = {100.0, 0.01, 7.0, 3.0};
    const double shift[] = {-40.0, 2.5, 100.0, -7.0};
    for (std::size_t i = 0; i < out.n_rows(); ++i)
      for (std::size_t k = 0; k < out.n_features(); ++k)
        out.features[i * out.n_features() + k] =
            scale[k] * out.features[i * out.n_features() + k] + shift[k];
    return out;
  };
  const data::Dataset scaled = rescale(ds);
  for (ModelKind kind : {ModelKind::Mlp, ModelKind::Forest, ModelKind::Gbt}) {
    const HyperConfig cfg = HyperConfig::defaults(kind, Scenario::A);
    const TrainedModel a = train(kind, ds, cfg, 23);
    const TrainedModel b = train(kind, scaled, cfg, 23);
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
      CHECK(a.predict(ds.row(i)).label == b.predict(scaled.row(i)).label);
  }
}

TEST_CASE("model save/load round-trips bit-exactly") {
  namespace fs = std::filesystem;
  const data::Dataset ds = random_dataset(300, 61);
  const std::string path =
      (fs::temp_directory_path() / "topomgr_model_roundtrip.json").string();
  for (ModelKind kind : {ModelKind::Mlp, ModelKind::Forest, ModelKind::Gbt}) {
    TrainedModel model = train(kind, ds, HyperConfig::defaults(kind, Scenario::A), 3);
    model.has_eval = true;
    model.eval_accuracy = 0.9;
    model.eval_mse = 0.1;
    save_model(model, path);
    const TrainedModel back = load_model(path);
    CHECK(back.mlp == model.mlp);
    CHECK(back.forest == model.forest);
    CHECK(back.gbt == model.gbt);
    CHECK(back.standardizer == model.standardizer);
    CHECK(back.classes == model.classes);
    CHECK(back.feature_schema == model.feature_schema);
    Rng rng(71);
    for (int i = 0; i < 1000; ++i) {
      const double row[] = {rng.uniform(-3, 3), rng.uniform(-3, 3),
                            rng.uniform(-3, 3), rng.uniform(-3, 3)};
      const Prediction pa = model.predict(row);
      const Prediction pb = back.predict(row);
      CHECK(pa.label == pb.label);
      CHECK(pa.scores == pb.scores);
    }
    // canonical serialization: saving the same model twice is byte-stable
    CHECK(model_to_json(model) == model_to_json(back));
  }
  std::remove(path.c_str());
}

TEST_CASE("model file version and corruption errors") {
  const data::Dataset ds = random_dataset(120, 2);
  TrainedModel model = train(ModelKind::Gbt, ds, HyperConfig::defaults(ModelKind::Gbt, Scenario::A), 3);
  std::string text = model_to_json(model);
  SUBCASE("unknown version tag") {
    auto pos = text.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 12, "\"version\": 9");
    CHECK_THROWS_AS(model_from_json(text), ConfigError);
  }
  SUBCASE("not json") { CHECK_THROWS_AS(model_from_json("{oops"), DataError); }
  SUBCASE("missing schema id") {
    CHECK_THROWS_AS(model_from_json("{\"version\": 1}"), DataError);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const data::Dataset ds = random_dataset(300, 77);
  for (ModelKind kind : {ModelKind::Mlp, ModelKind::Forest, ModelKind::Gbt}) {
    const HyperConfig cfg = HyperConfig::defaults(kind, Scenario::A);
    const TrainedModel a = train(kind, ds, cfg, 42);
    const TrainedModel b = train(kind, ds, cfg, 42);
    CHECK(model_to_json(a) == model_to_json(b));
  }
}
