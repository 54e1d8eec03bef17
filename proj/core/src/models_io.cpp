#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topomgr/models.hpp"

namespace topomgr {
namespace ml {

using nlohmann::json;

namespace {

constexpr const char* kSchemaId = "topomgr-model";
constexpr int kSchemaVersion = 1;

void require_finite(double v) {
  if (!std::isfinite(v))
    throw DataError("non-finite parameter; refusing to serialize");
}

json tree_to_json(const Tree& t) {
  json j;
  auto& feature = j["feature"] = json::array();
  auto& threshold = j["threshold"] = json::array();
  auto& left = j["left"] = json::array();
  auto& right = j["right"] = json::array();
  auto& value = j["value"] = json::array();
  for (const auto& n : t.nodes) {
    require_finite(n.threshold);
    require_finite(n.value);
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  j["n_nodes"] = t.nodes.size();
  return j;
}

Tree tree_from_json(const json& j) {
  Tree t;
  const auto n = j.at("n_nodes").get<std::size_t>();
  const auto& feature = j.at("feature");
  const auto& threshold = j.at("threshold");
  const auto& left = j.at("left");
  const auto& right = j.at("right");
  const auto& value = j.at("value");
  if (feature.size() != n || threshold.size() != n || left.size() != n ||
      right.size() != n || value.size() != n)
    throw DataError("corrupted model file: tree array sizes disagree");
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.nodes[i].feature = feature[i].get<int>();
    t.nodes[i].threshold = threshold[i].get<double>();
    t.nodes[i].left = left[i].get<int>();
    t.nodes[i].right = right[i].get<int>();
    t.nodes[i].value = value[i].get<double>();
  }
  return t;
}

json hyper_to_json(const HyperConfig& h) {
  switch (h.kind) {
    case ModelKind::Mlp:
      return json{{"hidden_sizes", h.mlp.hidden_sizes},
                  {"l2", h.mlp.l2},
                  {"max_iterations", h.mlp.max_iterations},
                  {"tolerance", h.mlp.tolerance}};
    case ModelKind::Forest:
      return json{{"n_trees", h.forest.n_trees},
                  {"max_depth", h.forest.max_depth}};
    case ModelKind::Gbt:
      return json{{"n_trees", h.gbt.n_trees},
                  {"max_depth", h.gbt.max_depth},
                  {"learning_rate", h.gbt.learning_rate}};
  }
  return {};
}

HyperConfig hyper_from_json(ModelKind kind, const json& j) {
  HyperConfig h;
  h.kind = kind;
  switch (kind) {
    case ModelKind::Mlp:
      h.mlp.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
      h.mlp.l2 = j.at("l2").get<double>();
      h.mlp.max_iterations = j.at("max_iterations").get<int>();
      h.mlp.tolerance = j.at("tolerance").get<double>();
      break;
    case ModelKind::Forest:
      h.forest.n_trees = j.at("n_trees").get<int>();
      h.forest.max_depth = j.at("max_depth").get<int>();
      break;
    case ModelKind::Gbt:
      h.gbt.n_trees = j.at("n_trees").get<int>();
      h.gbt.max_depth = j.at("max_depth").get<int>();
      h.gbt.learning_rate = j.at("learning_rate").get<double>();
      break;
  }
  return h;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["schema"] = kSchemaId;
  j["version"] = kSchemaVersion;
  j["kind"] = to_string(model.kind);
  j["hyper"] = hyper_to_json(model.hyper);
  j["feature_schema"] = model.feature_schema;
  j["classes"] = model.classes;
  for (double v : model.standardizer.mean) require_finite(v);
  for (double v : model.standardizer.std_dev) require_finite(v);
  j["standardizer"] = {{"mean", model.standardizer.mean},
                       {"std_dev", model.standardizer.std_dev}};
  json params;
  switch (model.kind) {
    case ModelKind::Mlp: {
      for (const auto& w : model.mlp.weights)
        for (double v : w) require_finite(v);
      for (const auto& b : model.mlp.biases)
        for (double v : b) require_finite(v);
      params = {{"layer_sizes", model.mlp.layer_sizes},
                {"weights", model.mlp.weights},
                {"biases", model.mlp.biases}};
      break;
    }
    case ModelKind::Forest: {
      json trees = json::array();
      for (const auto& t : model.forest.trees) trees.push_back(tree_to_json(t));
      params = {{"trees", trees}};
      break;
    }
    case ModelKind::Gbt: {
      json rounds = json::array();
      for (const auto& round : model.gbt.rounds) {
        json rt = json::array();
        for (const auto& t : round) rt.push_back(tree_to_json(t));
        rounds.push_back(rt);
      }
      params = {{"learning_rate", model.gbt.learning_rate}, {"rounds", rounds}};
      break;
    }
  }
  j["params"] = params;
  // Deterministic metadata only: wall-clock training time stays out of
  // the file so reruns with equal seeds produce identical bytes.
  j["metadata"] = {{"seed", model.seed},
                   {"window", model.window},
                   {"horizon", model.horizon},
                   {"data_digest", model.data_digest}};
  if (model.has_eval)
    j["evaluation"] = {{"accuracy", model.eval_accuracy},
                       {"mse", model.eval_mse}};
  return j.dump(2);
}

TrainedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupted model file: ") + e.what());
  }
  if (j.value("schema", std::string()) != kSchemaId)
    throw DataError("not a model file (missing schema id)");
  if (j.value("version", -1) != kSchemaVersion)
    throw ConfigError("unsupported model file version: " +
                      j.value("version", json()).dump());
  try {
    TrainedModel m;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.hyper = hyper_from_json(m.kind, j.at("hyper"));
    m.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
    m.classes = j.at("classes").get<std::vector<int>>();
    m.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.std_dev =
        j.at("standardizer").at("std_dev").get<std::vector<double>>();
    const json& params = j.at("params");
    switch (m.kind) {
      case ModelKind::Mlp:
        m.mlp.layer_sizes = params.at("layer_sizes").get<std::vector<int>>();
        m.mlp.weights = params.at("weights").get<std::vector<std::vector<double>>>();
        m.mlp.biases = params.at("biases").get<std::vector<std::vector<double>>>();
        break;
      case ModelKind::Forest:
        for (const auto& jt : params.at("trees"))
          m.forest.trees.push_back(tree_from_json(jt));
        break;
      case ModelKind::Gbt:
        m.gbt.learning_rate = params.at("learning_rate").get<double>();
        for (const auto& jr : params.at("rounds")) {
          std::vector<Tree> round;
          for (const auto& jt : jr) round.push_back(tree_from_json(jt));
          m.gbt.rounds.push_back(std::move(round));
        }
        break;
    }
    m.seed = j.at("metadata").value("seed", std::uint64_t{0});
    m.window = j.at("metadata").value("window", 1);
    m.horizon = j.at("metadata").value("horizon", 0);
    m.data_digest = j.at("metadata").value("data_digest", std::string());
    if (j.contains("evaluation")) {
      m.has_eval = true;
      m.eval_accuracy = j["evaluation"].value("accuracy", 0.0);
      m.eval_mse = j["evaluation"].value("mse", 0.0);
    }
    if (m.classes.size() < 2) throw DataError("corrupted model file: class set");
    if (m.standardizer.mean.size() != m.feature_schema.size() ||
        m.standardizer.std_dev.size() != m.feature_schema.size())
      throw DataError("corrupted model file: standardizer shape");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupted model file: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out << model_to_json(model) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace ml
}  // namespace topomgr
