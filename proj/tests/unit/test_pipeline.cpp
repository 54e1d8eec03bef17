#include <doctest.h>

#include <array>
#include <cmath>

#include "topomgr/pipeline.hpp"
#include "topomgr/sim.hpp"

using namespace topomgr;
using namespace topomgr::pipeline;

namespace {

// Model that predicts `label` for every input.
ml::TrainedModel constant_model(int label) {
  ml::TrainedModel m;
  m.kind = ml::ModelKind::Mlp;
  m.feature_schema = data::scenario_feature_names(Scenario::A);
  m.classes = {0, 1, 2, 3};
  m.standardizer.mean.assign(4, 0.0);
  m.standardizer.std_dev.assign(4, 1.0);
  m.mlp.layer_sizes = {4, 4};
  m.mlp.weights = {std::vector<double>(16, 0.0)};
  std::vector<double> bias(4, 0.0);
  bias[label] = 5.0;
  m.mlp.biases = {bias};
  return m;
}

TopN top_of(const std::vector<int>& votes) {
  TopN top;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    RankedModel rm;
    rm.model = constant_model(votes[i]);
    rm.report.model_id = "const-" + std::to_string(i);
    rm.report.accuracy = 1.0 - 0.01 * static_cast<double>(i);
    top.entries.push_back(std::move(rm));
  }
  return top;
}

// Brute-force reimplementation of the voting contract: highest count
// wins; ties go to the tied label voted by the best-ranked model.
int vote_oracle(const std::vector<int>& votes) {
  std::array<int, 4> counts{};
  for (int v : votes) counts[v]++;
  int best_count = 0;
  for (int c : counts) best_count = std::max(best_count, c);
  for (int v : votes)
    if (counts[v] == best_count) return v;
  return -1;
}

data::Dataset balanced_four_class(std::size_t per_class) {
  data::Dataset ds;
  ds.scenario = Scenario::A;
  ds.feature_names = data::scenario_feature_names(Scenario::A);
  for (std::size_t i = 0; i < per_class * 4; ++i) {
    const int label = static_cast<int>(i % 4);
    const double row[] = {static_cast<double>(label), 0.0, 1.0, 1.0};
    ds.append_row(static_cast<std::int64_t>(i), row, label);
  }
  return ds;
}

}  // namespace

TEST_CASE("vote: strict majority, priority tie-break, single model") {
  const double probe[] = {0, 0, 0, 0};
  CHECK(vote(top_of({1, 1, 3}), probe) == 1);
  CHECK(vote(top_of({1, 2, 3}), probe) == 1);  // all distinct: rank 1 wins
  CHECK(vote(top_of({2}), probe) == 2);
  CHECK(vote(top_of({3, 2, 2}), probe) == 2);
  CHECK(vote(top_of({3, 1, 3}), probe) == 3);
}

TEST_CASE("vote agrees with the brute-force oracle on all triples and pairs") {
  const double probe[] = {0, 0, 0, 0};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) {
        const std::vector<int> votes{a, b, c};
        CHECK(vote(top_of(votes), probe) == vote_oracle(votes));
      }
      const std::vector<int> pair{a, b};
      CHECK(vote(top_of(pair), probe) == vote_oracle(pair));
    }
}

TEST_CASE("dropping a model never flips an already-strict majority") {
  const double probe[] = {0, 0, 0, 0};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        const std::vector<int> votes{a, b, c};
        const int full = vote(top_of(votes), probe);
        for (int drop = 0; drop < 3; ++drop) {
          std::vector<int> rest;
          for (int i = 0; i < 3; ++i)
            if (i != drop) rest.push_back(votes[i]);
          if (rest[0] == rest[1])  // strict majority among the remaining
            CHECK(vote(top_of(rest), probe) == full);
        }
      }
}

TEST_CASE("select_top_n sorts by accuracy then mse and clamps") {
  auto entry = [](const char* id, double acc, double mse) {
    RankedModel rm;
    rm.report.model_id = id;
    rm.report.accuracy = acc;
    rm.report.mse = mse;
    return rm;
  };
  SUBCASE("accuracy ordering") {
    std::vector<RankedModel> reports{entry("rf", 0.907, 0.045),
                                     entry("ann", 0.928, 0.035),
                                     entry("xgb", 0.895, 0.048)};
    const TopN top = select_top_n(reports, 2);
    REQUIRE(top.entries.size() == 2);
    CHECK(top.entries[0].report.model_id == "ann");
    CHECK(top.entries[1].report.model_id == "rf");
  }
  SUBCASE("equal accuracy: lower mse first") {
    std::vector<RankedModel> reports{entry("a", 0.9, 0.045), entry("b", 0.9, 0.035)};
    const TopN top = select_top_n(reports, 2);
    CHECK(top.entries[0].report.model_id == "b");
  }
  SUBCASE("n larger than the list clamps") {
    std::vector<RankedModel> reports{entry("a", 0.9, 0.1), entry("b", 0.8, 0.1),
                                     entry("c", 0.7, 0.1)};
    CHECK(select_top_n(reports, 10).entries.size() == 3);
  }
  SUBCASE("output is totally ordered") {
    Rng rng(5);
    std::vector<RankedModel> reports;
    for (int i = 0; i < 20; ++i)
      reports.push_back(entry("m", rng.uniform(0, 1), rng.uniform(0, 1)));
    const TopN top = select_top_n(reports, 20);
    for (std::size_t i = 1; i < top.entries.size(); ++i) {
      const auto& a = top.entries[i - 1].report;
      const auto& b = top.entries[i].report;
      CHECK((a.accuracy > b.accuracy ||
             (a.accuracy == b.accuracy && a.mse <= b.mse)));
    }
  }
}

TEST_CASE("evaluate: perfect, constant and off-by-one predictors") {
  SUBCASE("perfect predictor") {
    // features encode the label, a forest memorizes the mapping
    const data::Dataset ds = balanced_four_class(20);
    ml::HyperConfig cfg;
    cfg.kind = ml::ModelKind::Forest;
    cfg.forest.n_trees = 5;
    cfg.forest.max_depth = 4;
    const ml::TrainedModel model = ml::train(ml::ModelKind::Forest, ds, cfg, 1);
    const EvalReport rep = evaluate(model, ds, 0);
    CHECK(rep.accuracy == 1.0);
    CHECK(rep.mse == 0.0);
    for (int t = 0; t < 4; ++t) {
      REQUIRE(rep.row_present[t]);
      CHECK(rep.confusion[t][t] == 1.0);
    }
  }
  SUBCASE("constant-0 predictor on a balanced 4-class test") {
    const data::Dataset ds = balanced_four_class(25);
    const EvalReport rep = evaluate(constant_model(0), ds, 0);
    CHECK(rep.accuracy == doctest::Approx(0.25));
    // LOSS row (true label 2) collapses onto No_Chg
    CHECK(rep.confusion[2][0] == 1.0);
    CHECK(rep.confusion[2][2] == 0.0);
    // mse = (0 + 1 + 4 + 9) / 4
    CHECK(rep.mse == doctest::Approx(3.5));
  }
  SUBCASE("always off by one class index") {
    data::Dataset train;  // feature 0 encodes target = label + 1
    train.scenario = Scenario::A;
    train.feature_names = data::scenario_feature_names(Scenario::A);
    for (int i = 0; i < 90; ++i) {
      const int base = i % 3;
      const double row[] = {static_cast<double>(base), 0.0, 0.0, 0.0};
      train.append_row(i, row, base + 1);
    }
    ml::HyperConfig cfg;
    cfg.kind = ml::ModelKind::Forest;
    cfg.forest.n_trees = 3;
    cfg.forest.max_depth = 3;
    const ml::TrainedModel model = ml::train(ml::ModelKind::Forest, train, cfg, 2);
    data::Dataset test = train;
    for (auto& l : test.labels) l -= 1;  // same features, labels one lower
    const EvalReport rep = evaluate(model, test, 0);
    CHECK(rep.accuracy == 0.0);
    CHECK(rep.mse == doctest::Approx(1.0));
  }
}

TEST_CASE("evaluate: accuracy recomputed from confusion counts is exact") {
  sim::SimConfig cfg = sim::default_config(Scenario::A);
  cfg.iterations = 600;
  cfg.seed = 31;
  const data::Dataset ds = sim::run_scenario(cfg);
  ml::HyperConfig hc = ml::HyperConfig::defaults(ml::ModelKind::Gbt, Scenario::A);
  hc.gbt.n_trees = 10;
  const ml::TrainedModel model = ml::train(ml::ModelKind::Gbt, ds, hc, 3);
  const EvalReport rep = evaluate(model, ds, 0);
  std::int64_t diag = 0, total = 0;
  for (int t = 0; t < 4; ++t)
    for (int p = 0; p < 4; ++p) {
      total += rep.confusion_counts[t][p];
      if (t == p) diag += rep.confusion_counts[t][p];
    }
  CHECK(rep.accuracy == static_cast<double>(diag) / static_cast<double>(total));
}

TEST_CASE("scenario selection by field set") {
  ScenarioSelector sel;
  MonitoringSample a;
  a.subject = "bh-1";
  a.fields = {{"x_m", 1}, {"y_m", 2}, {"throughput_mbps", 50}, {"rtt_ms", 12}};
  const SelectResult ra = sel.select(a);
  CHECK(ra.status == SelectStatus::Selected);
  CHECK(ra.scenario == Scenario::A);
  CHECK(ra.features == std::vector<double>{1, 2, 50, 12});

  MonitoringSample b;
  b.subject = "ue-1";
  b.fields = {{"x_m", 3}, {"y_m", 4}, {"rssi_dbm", -70}, {"velocity_mps", 2}};
  const SelectResult rb = sel.select(b);
  CHECK(rb.status == SelectStatus::Selected);
  CHECK(rb.scenario == Scenario::B);

  // unchanged needed parameters: dropped
  CHECK(sel.select(b).status == SelectStatus::Dropped);
  b.fields["rssi_dbm"] = -71;
  CHECK(sel.select(b).status == SelectStatus::Selected);

  MonitoringSample neither;
  neither.subject = "x";
  neither.fields = {{"x_m", 0}, {"y_m", 0}};
  CHECK(sel.select(neither).status == SelectStatus::Rejected);

  MonitoringSample both = a;
  both.fields.insert(b.fields.begin(), b.fields.end());
  CHECK(sel.select(both).status == SelectStatus::Rejected);
}

TEST_CASE("grid_search picks the dominant config, singleton short-circuits") {
  sim::SimConfig scfg = sim::default_config(Scenario::A);
  scfg.iterations = 1500;
  scfg.seed = 13;
  const data::Dataset ds = sim::run_scenario(scfg);

  ml::HyperConfig strong;
  strong.kind = ml::ModelKind::Forest;
  strong.forest = {40, 7};
  ml::HyperConfig weak;
  weak.kind = ml::ModelKind::Forest;
  weak.forest = {1, 1};

  SUBCASE("singleton") {
    CHECK(grid_search(ml::ModelKind::Forest, {weak}, ds, 0.2, 1) == weak);
  }
  SUBCASE("dominant config wins (checked against exhaustive evaluation)") {
    const data::Split sp = data::split(ds, 0.2);
    const EvalReport strong_rep =
        evaluate(ml::train(ml::ModelKind::Forest, sp.train, strong, 1), sp.test, 0);
    const EvalReport weak_rep =
        evaluate(ml::train(ml::ModelKind::Forest, sp.train, weak, 1), sp.test, 0);
    REQUIRE(strong_rep.accuracy > weak_rep.accuracy);  // dominance premise
    const ml::HyperConfig picked =
        grid_search(ml::ModelKind::Forest, {weak, strong}, ds, 0.2, 1);
    CHECK(picked == strong);
  }
  SUBCASE("exact tie keeps enumeration order") {
    const ml::HyperConfig picked =
        grid_search(ml::ModelKind::Forest, {strong, strong}, ds, 0.2, 1);
    CHECK(picked == strong);
  }
  SUBCASE("empty space") {
    CHECK_THROWS_AS(grid_search(ml::ModelKind::Forest, {}, ds, 0.2, 1),
                    ConfigError);
  }
}

TEST_CASE("run_pipeline composes and is deterministic") {
  sim::SimConfig scfg = sim::default_config(Scenario::A);
  scfg.iterations = 600;
  scfg.seed = 19;
  const data::Dataset ds = sim::run_scenario(scfg);

  PipelineOptions opts = PipelineOptions::for_scenario(Scenario::A);
  opts.timing_reps = 0;
  opts.kinds = {ml::ModelKind::Forest, ml::ModelKind::Gbt};

  const PipelineResult r1 = run_pipeline(ds, Scenario::A, 3, opts, 7);
  CHECK(r1.all.size() == 2);
  CHECK(r1.top.entries.size() == 2);

  const PipelineResult r2 = run_pipeline(ds, Scenario::A, 3, opts, 7);
  for (std::size_t i = 0; i < r1.all.size(); ++i) {
    CHECK(r1.all[i].report.accuracy == r2.all[i].report.accuracy);
    CHECK(r1.all[i].report.mse == r2.all[i].report.mse);
    CHECK(ml::model_to_json(r1.all[i].model) == ml::model_to_json(r2.all[i].model));
  }
  CHECK(r1.top.entries[0].report.model_id == r2.top.entries[0].report.model_id);

  CHECK_THROWS_AS(run_pipeline(ds, Scenario::B, 1, opts, 7), DataError);
}

TEST_CASE("feature windower flattens the last W samples oldest-first") {
  FeatureWindower w(3);
  const double r1[] = {1, 10};
  const double r2[] = {2, 20};
  const double r3[] = {3, 30};
  const double r4[] = {4, 40};
  CHECK_FALSE(w.push("s", r1));
  CHECK_FALSE(w.push("s", r2));
  const auto f3 = w.push("s", r3);
  REQUIRE(f3);
  CHECK(*f3 == std::vector<double>{1, 10, 2, 20, 3, 30});
  const auto f4 = w.push("s", r4);
  REQUIRE(f4);
  CHECK(*f4 == std::vector<double>{2, 20, 3, 30, 4, 40});
  // independent subjects do not share history
  CHECK_FALSE(w.push("other", r1));
}
