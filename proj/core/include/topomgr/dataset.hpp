#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topomgr/topology.hpp"

namespace topomgr {
namespace data {

// 4-class change code. Scenario A: 0 none, 1 bandwidth, 2 loss, 3 delay.
// Scenario B: 0 inside, 1 exit, 2 outside, 3 re-enter.
constexpr int kNumLabels = 4;

bool is_valid_label(int label);

struct Provenance {
  std::string config_digest;
  std::uint64_t seed = 0;
  bool operator==(const Provenance&) const = default;
};

// Immutable after construction; safe to share across threads.
struct Dataset {
  Scenario scenario = Scenario::A;
  std::vector<std::string> feature_names;
  std::vector<std::int64_t> steps;   // one per row
  std::vector<double> features;      // row-major, n_rows x n_features
  std::vector<int> labels;           // one per row
  Provenance provenance;

  bool operator==(const Dataset&) const = default;

  std::size_t n_rows() const { return labels.size(); }
  std::size_t n_features() const { return feature_names.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n_features(), n_features()};
  }
  void append_row(std::int64_t step, std::span<const double> feats, int label);
};

// Flattened history features: row i holds samples i..i+W-1 (oldest first,
// columns renamed "<name>_lag<k>" with lag 0 = most recent) and the label
// from sample i+W-1+H. H >= 1 predicts, H = 0 detects.
struct WindowedDataset {
  int window = 1;
  int horizon = 0;
  Dataset data;
};

enum class SplitMode { Chronological, Shuffled };

struct Split {
  Dataset train;
  Dataset test;
};

// Chronological mode: test = last ceil(fraction * N) rows (the most
// recently collected data). Shuffled mode: seeded permutation first.
Split split(const Dataset& ds, double test_fraction,
            SplitMode mode = SplitMode::Chronological, std::uint64_t seed = 0);

WindowedDataset window(const Dataset& ds, int w, int h);

// Expected CSV headers:
//   scenario A: step,x_m,y_m,throughput_mbps,rtt_ms,label
//   scenario B: step,x_m,y_m,rssi_dbm,velocity_mps,label
// UTF-8, comma separator, '.' decimal, LF line endings. Doubles are
// written shortest-round-trip, so write -> read is lossless.
void write_csv(const Dataset& ds, const std::string& path);
Dataset read_csv(const std::string& path);

// Sidecar carrying config digest and seed, at <csv_path>.provenance.json.
// read_csv picks it up automatically when present.
void write_provenance_sidecar(const Dataset& ds, const std::string& csv_path);

std::vector<std::string> scenario_feature_names(Scenario s);

// "x_m_lag3" -> "x_m"; names without a lag suffix are returned unchanged.
std::string base_feature_name(const std::string& windowed_name);
int window_of(const std::vector<std::string>& feature_names);

}  // namespace data
}  // namespace topomgr
