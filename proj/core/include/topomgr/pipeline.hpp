#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topomgr/dataset.hpp"
#include "topomgr/models.hpp"

namespace topomgr {
namespace pipeline {

struct EvalReport {
  std::string model_id;
  double accuracy = 0.0;
  double mse = 0.0;  // on integer labels
  double training_time_s = 0.0;
  double inference_time_us = 0.0;  // median single-sample latency
  // confusion[true][pred]; rows normalized where row_present, counts kept
  // so accuracy can be recomputed exactly from the raw matrix
  std::array<std::array<std::int64_t, data::kNumLabels>, data::kNumLabels> confusion_counts{};
  std::array<std::array<double, data::kNumLabels>, data::kNumLabels> confusion{};
  std::array<bool, data::kNumLabels> row_present{};
};

struct RankedModel {
  ml::TrainedModel model;
  EvalReport report;
};

// Ordered by accuracy descending, then MSE ascending; entry 0 is the
// highest-priority voter.
struct TopN {
  std::vector<RankedModel> entries;
};

// --- scenario selection ----------------------------------------------------

struct MonitoringSample {
  std::string subject;  // link id (A) or UE id (B)
  std::map<std::string, double> fields;
};

enum class SelectStatus { Selected, Dropped, Rejected };

struct SelectResult {
  SelectStatus status = SelectStatus::Rejected;
  Scenario scenario = Scenario::A;
  std::vector<double> features;  // scenario schema order
  std::string reason;            // set when Rejected
};

// Maps a monitoring sample onto a scenario by its field set
// (throughput+rtt -> A, rssi+velocity -> B) and extracts the feature
// vector. Consecutive samples of a subject whose needed parameters did
// not change are dropped. Ambiguous or unrecognized field sets reject.
class ScenarioSelector {
 public:
  SelectResult select(const MonitoringSample& sample);
  void reset() { last_.clear(); }

 private:
  std::map<std::string, std::vector<double>> last_;
};

// Stateless classification, no unchanged-sample memory.
SelectResult classify_sample(const MonitoringSample& sample);

// --- pipeline operations ---------------------------------------------------

// Evaluates every config on a chronological validation tail of the
// training data; best validation accuracy wins, ties broken by lower
// MSE, then by enumeration order.
ml::HyperConfig grid_search(ml::ModelKind kind,
                            const std::vector<ml::HyperConfig>& space,
                            const data::Dataset& train_data,
                            double validation_fraction, std::uint64_t seed);

// timing_reps > 0 measures the median of that many single-sample predict
// calls (after 100 warm-up calls); <= 0 skips timing.
EvalReport evaluate(const ml::TrainedModel& model, const data::Dataset& test,
                    int timing_reps = 1000);

TopN select_top_n(std::vector<RankedModel> reports, std::size_t n);

struct VoteDetail {
  int decision = 0;
  std::vector<int> votes;  // votes[i] is entries[i]'s prediction
};

// Majority vote; a count tie goes to the tied label voted by the
// highest-ranked model.
VoteDetail vote_detail(const TopN& top, std::span<const double> features);
int vote(const TopN& top, std::span<const double> features);

std::vector<ml::HyperConfig> default_grid(ml::ModelKind kind, Scenario scenario);

struct PipelineOptions {
  double test_fraction = 0.2;
  double validation_fraction = 0.2;
  int window = 1;
  int horizon = 0;
  int timing_reps = 1000;
  std::vector<ml::ModelKind> kinds{ml::ModelKind::Mlp, ml::ModelKind::Forest,
                                   ml::ModelKind::Gbt};
  // Scenario defaults: A detects per sample (W=1, H=0); B predicts one
  // step ahead from a 10-sample history (W=10, H=1).
  static PipelineOptions for_scenario(Scenario s);
};

struct PipelineResult {
  Scenario scenario = Scenario::A;
  int window = 1;
  int horizon = 0;
  std::vector<RankedModel> all;  // enumeration order of options.kinds
  TopN top;
};

// split -> window -> grid search per kind -> final train -> evaluate ->
// Top-N. Deterministic for a fixed seed (timings aside).
PipelineResult run_pipeline(const data::Dataset& dataset, Scenario scenario,
                            std::size_t top_n, const PipelineOptions& options,
                            std::uint64_t seed);

// Table-style report (accuracy / MSE / training time / inference time
// plus per-model confusion matrices).
std::string render_report(const PipelineResult& result);
std::string report_to_json(const PipelineResult& result);

// Rolling per-subject feature history for live prediction with windowed
// models: returns the flattened lag vector once W samples are buffered.
class FeatureWindower {
 public:
  explicit FeatureWindower(int window) : window_(window) {}

  std::optional<std::vector<double>> push(const std::string& subject,
                                          std::span<const double> base);
  void reset() { history_.clear(); }

 private:
  int window_;
  std::map<std::string, std::deque<std::vector<double>>> history_;
};

}  // namespace pipeline
}  // namespace topomgr
