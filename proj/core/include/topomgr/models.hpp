#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topomgr/dataset.hpp"
#include "topomgr/rng.hpp"

namespace topomgr {
namespace ml {

enum class ModelKind { Mlp, Forest, Gbt };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct MlpHyper {
  std::vector<int> hidden_sizes{3, 8, 8};
  double l2 = 1e-5;
  int max_iterations = 500;
  double tolerance = 1e-6;  // stop when |loss delta| falls below
  bool operator==(const MlpHyper&) const = default;
};

struct ForestHyper {
  int n_trees = 40;
  int max_depth = 7;
  bool operator==(const ForestHyper&) const = default;
};

struct GbtHyper {
  int n_trees = 40;  // boosting rounds
  int max_depth = 6;
  double learning_rate = 0.3;
  bool operator==(const GbtHyper&) const = default;
};

struct HyperConfig {
  ModelKind kind = ModelKind::Mlp;
  MlpHyper mlp;
  ForestHyper forest;
  GbtHyper gbt;
  bool operator==(const HyperConfig&) const = default;

  static HyperConfig defaults(ModelKind kind, Scenario scenario);
  std::string describe() const;
};

// Per-feature z-scoring fitted on the training split only. Columns with
// zero spread keep std 1 so they map to a constant.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std_dev;
  bool operator==(const Standardizer&) const = default;

  static Standardizer fit(const data::Dataset& ds);
  void apply(std::span<const double> in, std::span<double> out) const;
};

// Flat binary tree. feature == -1 marks a leaf; value holds the class
// index (classification) or the additive score (gradient boosting).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;
  bool operator==(const Tree&) const = default;

  double predict(std::span<const double> x) const;
  int depth() const;  // number of split levels on the deepest path
};

struct MlpParams {
  std::vector<int> layer_sizes;  // input, hidden..., output
  std::vector<std::vector<double>> weights;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases;   // per layer
  bool operator==(const MlpParams&) const = default;
};

struct ForestParams {
  std::vector<Tree> trees;
  bool operator==(const ForestParams&) const = default;
};

struct GbtParams {
  // rounds[r][k]: regression tree for class k at boosting round r
  std::vector<std::vector<Tree>> rounds;
  double learning_rate = 0.3;
  bool operator==(const GbtParams&) const = default;
};

struct Prediction {
  int label = 0;
  std::vector<double> scores;  // aligned with TrainedModel::classes, sums to 1
};

struct TrainedModel {
  ModelKind kind = ModelKind::Mlp;
  HyperConfig hyper;
  std::vector<std::string> feature_schema;
  std::vector<int> classes;  // sorted label values seen in training
  Standardizer standardizer;
  MlpParams mlp;
  ForestParams forest;
  GbtParams gbt;

  std::uint64_t seed = 0;
  int window = 1;
  int horizon = 0;
  std::string data_digest;
  // Wall-clock fit time. Kept out of the serialized file so that equal
  // seeds produce byte-identical model files.
  double training_time_s = 0.0;
  // Evaluation digest, filled in once the model has been evaluated.
  bool has_eval = false;
  double eval_accuracy = 0.0;
  double eval_mse = 0.0;

  Prediction predict(std::span<const double> features) const;
  std::string id() const;
};

// Deterministic for a fixed seed. Requires >= 2 classes and finite
// features; inputs are standardized internally.
TrainedModel train(ModelKind kind, const data::Dataset& train_data,
                   const HyperConfig& hyper, std::uint64_t seed);

// Model file: versioned JSON document with canonical key order and
// shortest-round-trip numbers, so identical models serialize to
// identical bytes and reload bit-exactly.
std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace ml
}  // namespace topomgr
