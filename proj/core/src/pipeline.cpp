#include "topomgr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace topomgr {
namespace pipeline {

using nlohmann::json;

// --- scenario selection ----------------------------------------------------

namespace {

bool has_all(const MonitoringSample& s, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (!s.fields.count(k)) return false;
  return true;
}

}  // namespace

SelectResult classify_sample(const MonitoringSample& sample) {
  const bool looks_a = has_all(sample, {"throughput_mbps", "rtt_ms"});
  const bool looks_b = has_all(sample, {"rssi_dbm", "velocity_mps"});
  if (looks_a && looks_b)
    return {SelectStatus::Rejected, Scenario::A, {}, "ambiguous field set"};
  if (!looks_a && !looks_b)
    return {SelectStatus::Rejected, Scenario::A, {}, "unrecognized field set"};
  if (!has_all(sample, {"x_m", "y_m"}))
    return {SelectStatus::Rejected, Scenario::A, {}, "missing position fields"};

  SelectResult res;
  res.status = SelectStatus::Selected;
  res.scenario = looks_a ? Scenario::A : Scenario::B;
  for (const auto& name : data::scenario_feature_names(res.scenario))
    res.features.push_back(sample.fields.at(name));
  return res;
}

SelectResult ScenarioSelector::select(const MonitoringSample& sample) {
  SelectResult res = classify_sample(sample);
  if (res.status != SelectStatus::Selected) return res;
  const std::string key = to_string(res.scenario) + "/" + sample.subject;
  auto it = last_.find(key);
  if (it != last_.end() && it->second == res.features) {
    res.status = SelectStatus::Dropped;
    return res;
  }
  last_[key] = res.features;
  return res;
}

// --- evaluation ------------------------------------------------------------

EvalReport evaluate(const ml::TrainedModel& model, const data::Dataset& test,
                    int timing_reps) {
  if (test.n_rows() == 0) throw DataError("empty test data");
  if (test.feature_names != model.feature_schema)
    throw DataError("test data does not match model feature schema");

  EvalReport rep;
  rep.model_id = model.id();
  rep.training_time_s = model.training_time_s;

  const std::size_t n = test.n_rows();
  std::size_t correct = 0;
  double se = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ml::Prediction pred = model.predict(test.row(i));
    const int truth = test.labels[i];
    rep.confusion_counts[truth][pred.label]++;
    if (pred.label == truth) ++correct;
    const double d = pred.label - truth;
    se += d * d;
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  rep.mse = se / static_cast<double>(n);

  for (int t = 0; t < data::kNumLabels; ++t) {
    std::int64_t row_total = 0;
    for (int p = 0; p < data::kNumLabels; ++p) row_total += rep.confusion_counts[t][p];
    rep.row_present[t] = row_total > 0;
    for (int p = 0; p < data::kNumLabels; ++p)
      rep.confusion[t][p] = row_total > 0
                                ? static_cast<double>(rep.confusion_counts[t][p]) /
                                      static_cast<double>(row_total)
                                : 0.0;
  }

  if (timing_reps > 0) {
    using clock = std::chrono::steady_clock;
    for (int i = 0; i < 100; ++i) (void)model.predict(test.row(i % n));
    std::vector<double> lat(timing_reps);
    for (int i = 0; i < timing_reps; ++i) {
      const auto t0 = clock::now();
      (void)model.predict(test.row(i % n));
      const auto t1 = clock::now();
      lat[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    }
    std::nth_element(lat.begin(), lat.begin() + timing_reps / 2, lat.end());
    rep.inference_time_us = lat[timing_reps / 2];
  }
  return rep;
}

// --- grid search and Top-N -------------------------------------------------

ml::HyperConfig grid_search(ml::ModelKind kind,
                            const std::vector<ml::HyperConfig>& space,
                            const data::Dataset& train_data,
                            double validation_fraction, std::uint64_t seed) {
  if (space.empty()) throw ConfigError("empty hyperparameter space");
  if (space.size() == 1) return space.front();

  const data::Split sp = data::split(train_data, validation_fraction,
                                     data::SplitMode::Chronological);
  std::size_t best = 0;
  double best_acc = -1.0, best_mse = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    ml::HyperConfig cfg = space[i];
    cfg.kind = kind;
    const ml::TrainedModel model = ml::train(kind, sp.train, cfg, seed);
    const EvalReport rep = evaluate(model, sp.test, 0);
    if (rep.accuracy > best_acc ||
        (rep.accuracy == best_acc && rep.mse < best_mse)) {
      best = i;
      best_acc = rep.accuracy;
      best_mse = rep.mse;
    }
  }
  ml::HyperConfig out = space[best];
  out.kind = kind;
  return out;
}

TopN select_top_n(std::vector<RankedModel> reports, std::size_t n) {
  if (reports.empty()) throw DataError("no models to rank");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const RankedModel& a, const RankedModel& b) {
                     if (a.report.accuracy != b.report.accuracy)
                       return a.report.accuracy > b.report.accuracy;
                     return a.report.mse < b.report.mse;
                   });
  if (n < reports.size()) reports.resize(n);
  return {std::move(reports)};
}

VoteDetail vote_detail(const TopN& top, std::span<const double> features) {
  if (top.entries.empty()) throw DataError("empty Top-N");
  VoteDetail detail;
  std::array<int, data::kNumLabels> counts{};
  for (const auto& entry : top.entries) {
    const int label = entry.model.predict(features).label;
    detail.votes.push_back(label);
    counts[label]++;
  }
  int max_count = 0;
  for (int c : counts) max_count = std::max(max_count, c);
  // first model in rank order whose vote belongs to the tied top group
  for (std::size_t i = 0; i < detail.votes.size(); ++i) {
    if (counts[detail.votes[i]] == max_count) {
      detail.decision = detail.votes[i];
      break;
    }
  }
  return detail;
}

int vote(const TopN& top, std::span<const double> features) {
  return vote_detail(top, features).decision;
}

// --- end-to-end ------------------------------------------------------------

std::vector<ml::HyperConfig> default_grid(ml::ModelKind kind, Scenario scenario) {
  std::vector<ml::HyperConfig> space;
  switch (kind) {
    case ml::ModelKind::Mlp: {
      const std::vector<std::vector<int>> hidden{{8, 8}, {3, 8, 8}, {16, 16}};
      for (const auto& h : hidden)
        for (double l2 : {1e-5, 1e-3}) {
          ml::HyperConfig cfg;
          cfg.kind = kind;
          cfg.mlp.hidden_sizes = h;
          cfg.mlp.l2 = l2;
          space.push_back(cfg);
        }
      break;
    }
    case ml::ModelKind::Forest: {
      for (int trees : {20, 40})
        for (int depth : {5, 7}) {
          ml::HyperConfig cfg;
          cfg.kind = kind;
          cfg.forest.n_trees = trees;
          cfg.forest.max_depth = depth;
          space.push_back(cfg);
        }
      break;
    }
    case ml::ModelKind::Gbt: {
      for (int trees : {20, 40})
        for (int depth : {2, 6}) {
          ml::HyperConfig cfg;
          cfg.kind = kind;
          cfg.gbt.n_trees = trees;
          cfg.gbt.max_depth = depth;
          cfg.gbt.learning_rate =
              ml::HyperConfig::defaults(kind, scenario).gbt.learning_rate;
          space.push_back(cfg);
        }
      break;
    }
  }
  return space;
}

PipelineOptions PipelineOptions::for_scenario(Scenario s) {
  PipelineOptions opts;
  if (s == Scenario::B) {
    opts.window = 10;
    opts.horizon = 1;
  }
  return opts;
}

PipelineResult run_pipeline(const data::Dataset& dataset, Scenario scenario,
                            std::size_t top_n, const PipelineOptions& options,
                            std::uint64_t seed) {
  if (dataset.scenario != scenario)
    throw DataError("dataset scenario does not match requested scenario");

  PipelineResult result;
  result.scenario = scenario;
  result.window = options.window;
  result.horizon = options.horizon;

  const data::Split sp =
      data::split(dataset, options.test_fraction, data::SplitMode::Chronological);
  data::Dataset train = sp.train;
  data::Dataset test = sp.test;
  if (options.window > 1 || options.horizon > 0) {
    train = data::window(sp.train, options.window, options.horizon).data;
    test = data::window(sp.test, options.window, options.horizon).data;
  }

  for (ml::ModelKind kind : options.kinds) {
    const ml::HyperConfig cfg =
        grid_search(kind, default_grid(kind, scenario), train,
                    options.validation_fraction, seed);
    ml::TrainedModel model = ml::train(kind, train, cfg, seed);
    model.window = options.window;
    model.horizon = options.horizon;
    EvalReport rep = evaluate(model, test, options.timing_reps);
    model.has_eval = true;
    model.eval_accuracy = rep.accuracy;
    model.eval_mse = rep.mse;
    result.all.push_back({std::move(model), std::move(rep)});
  }
  result.top = select_top_n(result.all, top_n);
  return result;
}

// --- reporting -------------------------------------------------------------

namespace {

const char* label_name(Scenario s, int label) {
  static const char* a_names[] = {"No_Chg", "BW", "LOSS", "Delay"};
  static const char* b_names[] = {"0", "1", "2", "3"};
  return s == Scenario::A ? a_names[label] : b_names[label];
}

}  // namespace

std::string render_report(const PipelineResult& result) {
  std::ostringstream ss;
  ss << "Scenario " << to_string(result.scenario) << "  (window="
     << result.window << ", horizon=" << result.horizon << ")\n\n";
  ss << "Model                     Accuracy      MSE  Train [s]  Infer [us]\n";
  ss << "-----------------------------------------------------------------\n";
  char line[256];
  for (const auto& rm : result.all) {
    std::snprintf(line, sizeof(line), "%-24s %9.3f %8.3f %10.3f %11.3f\n",
                  rm.report.model_id.c_str(), rm.report.accuracy, rm.report.mse,
                  rm.report.training_time_s, rm.report.inference_time_us);
    ss << line;
  }
  ss << "\nTop-N ranking:\n";
  for (std::size_t i = 0; i < result.top.entries.size(); ++i) {
    std::snprintf(line, sizeof(line), "  %zu. %-24s acc=%.3f mse=%.3f\n", i + 1,
                  result.top.entries[i].report.model_id.c_str(),
                  result.top.entries[i].report.accuracy,
                  result.top.entries[i].report.mse);
    ss << line;
  }
  for (const auto& rm : result.all) {
    ss << "\nConfusion matrix (" << rm.report.model_id
       << "), rows = true label, row-normalized:\n";
    ss << "            ";
    for (int p = 0; p < data::kNumLabels; ++p) {
      std::snprintf(line, sizeof(line), "%8s", label_name(result.scenario, p));
      ss << line;
    }
    ss << "\n";
    for (int t = 0; t < data::kNumLabels; ++t) {
      if (!rm.report.row_present[t]) continue;
      std::snprintf(line, sizeof(line), "  %-10s", label_name(result.scenario, t));
      ss << line;
      for (int p = 0; p < data::kNumLabels; ++p) {
        std::snprintf(line, sizeof(line), "%8.3f", rm.report.confusion[t][p]);
        ss << line;
      }
      ss << "\n";
    }
  }
  return ss.str();
}

namespace {

json report_json(const EvalReport& rep) {
  json j;
  j["model_id"] = rep.model_id;
  j["accuracy"] = rep.accuracy;
  j["mse"] = rep.mse;
  j["training_time_s"] = rep.training_time_s;
  j["inference_time_us"] = rep.inference_time_us;
  json counts = json::array(), norm = json::array();
  for (int t = 0; t < data::kNumLabels; ++t) {
    counts.push_back(rep.confusion_counts[t]);
    norm.push_back(rep.confusion[t]);
  }
  j["confusion_counts"] = counts;
  j["confusion"] = norm;
  j["row_present"] = rep.row_present;
  return j;
}

}  // namespace

std::string report_to_json(const PipelineResult& result) {
  json j;
  j["scenario"] = to_string(result.scenario);
  j["window"] = result.window;
  j["horizon"] = result.horizon;
  json models = json::array();
  for (const auto& rm : result.all) models.push_back(report_json(rm.report));
  j["models"] = models;
  json top = json::array();
  for (const auto& rm : result.top.entries) top.push_back(rm.report.model_id);
  j["top_n"] = top;
  return j.dump(2);
}

std::optional<std::vector<double>> FeatureWindower::push(
    const std::string& subject, std::span<const double> base) {
  auto& hist = history_[subject];
  hist.emplace_back(base.begin(), base.end());
  while (hist.size() > static_cast<std::size_t>(window_)) hist.pop_front();
  if (hist.size() < static_cast<std::size_t>(window_)) return std::nullopt;
  std::vector<double> flat;
  flat.reserve(base.size() * window_);
  for (const auto& row : hist) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

}  // namespace pipeline
}  // namespace topomgr
