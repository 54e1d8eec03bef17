#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "topomgr/pipeline.hpp"
#include "topomgr/topology.hpp"

namespace httplib {
class Server;  // vendored cpp-httplib; linked privately by the core
}

namespace topomgr {
namespace service {

struct ServiceConfig {
  std::string topology_path;
  std::string model_dir;
  int port = 8080;
  std::string notification_log;  // append-only JSONL; empty disables
  // Scenario B re-association fallback when the UE leaves all coverage.
  std::optional<std::string> fallback_evo;
  // Link parameters applied to the subject link on a predicted
  // scenario-A change.
  double bottleneck_bandwidth = 0.1;
  double bottleneck_loss = 0.6;
  double bottleneck_delay = 100.0;
};

ServiceConfig parse_service_config(const std::string& json_text);
ServiceConfig load_service_config(const std::string& path);

struct VoteRecord {
  std::string model_id;
  int rank = 0;  // 0 = highest priority
  int vote = 0;
  bool operator==(const VoteRecord&) const = default;
};

struct ChangeNotification {
  std::uint64_t id = 0;  // equals the resulting snapshot version
  std::string created_at;
  Scenario scenario = Scenario::A;
  int label = 0;
  std::string subject;
  std::vector<VoteRecord> votes;
  ChangeEvent event;
  std::vector<Association> associations;  // re-associations applied
  std::vector<std::string> unreachable;   // UEs left without an EVO
  std::uint64_t snapshot_version = 0;
};

std::string notification_to_json(const ChangeNotification& n, int indent = -1);
std::vector<ChangeNotification> parse_notifications_json(const std::string& body);

struct SubscriptionFilter {
  std::optional<Scenario> scenario;
  std::set<int> labels;  // empty = all labels
};

struct Subscription {
  std::uint64_t id = 0;
  SubscriptionFilter filter;
  std::string delivery = "long_poll";  // or "webhook"
  std::string callback_url;
  std::string created_at;
};

struct IngestResult {
  bool accepted = false;
  std::uint64_t token = 0;
  std::string reason;
};

struct ModelInfo {
  Scenario scenario = Scenario::A;
  std::string model_id;
  int rank = 0;
  std::string digest;
  double accuracy = 0.0;
  double mse = 0.0;
  int window = 1;
  int horizon = 0;
};

// Minimal topology service: ingests monitoring samples, votes the loaded
// Top-N models, applies predicted changes to the topology, re-associates
// UEs and delivers notifications. Samples are processed strictly in
// arrival order by a single writer; readers get immutable snapshots.
class TopologyService {
 public:
  explicit TopologyService(const ServiceConfig& cfg);

  IngestResult ingest_sample(const pipeline::MonitoringSample& sample);
  // Drains the ingest queue; returns the notifications it produced.
  std::vector<ChangeNotification> process_pending();

  TopologySnapshot topology() const;
  TopologySnapshot initial_topology() const;

  Subscription subscribe(const SubscriptionFilter& filter,
                         const std::string& delivery,
                         const std::string& callback_url = "");
  // Cursor-based and idempotent: notifications with version > since.
  std::vector<ChangeNotification> notifications_since(std::uint64_t since) const;
  std::vector<ChangeNotification> subscription_notifications(
      std::uint64_t subscription_id, std::uint64_t since) const;

  std::vector<ModelInfo> models_info() const;
  void reload_models();
  bool ready(Scenario scenario) const;

  // HTTP front end (JSON bodies mirror the domain type field names).
  // run() blocks; serve_on_any_port() picks a free port and returns it,
  // serving from a background thread until stop().
  void run();
  int serve_on_any_port();
  void stop();

  ~TopologyService();

  struct ScenarioRuntime;

 private:
  struct Http;

  void setup_routes(httplib::Server& server);
  void load_models_locked();
  std::vector<ChangeNotification> process_locked();
  ChangeNotification apply_vote(ScenarioRuntime& rt, Scenario scenario,
                                const std::string& subject,
                                const pipeline::VoteDetail& votes,
                                const std::map<std::string, double>& fields);
  void deliver(const ChangeNotification& n);
  void append_log(const ChangeNotification& n);

  ServiceConfig cfg_;
  TopologySnapshot initial_;
  TopologySnapshot current_;
  std::unique_ptr<ScenarioRuntime> runtime_a_;
  std::unique_ptr<ScenarioRuntime> runtime_b_;

  struct QueuedSample {
    std::uint64_t token;
    Scenario scenario;
    std::string subject;
    std::vector<double> features;
    std::map<std::string, double> fields;
  };
  std::deque<QueuedSample> queue_;
  std::uint64_t next_token_ = 1;
  std::uint64_t next_subscription_ = 1;
  std::vector<Subscription> subscriptions_;
  std::vector<ChangeNotification> notifications_;
  pipeline::ScenarioSelector selector_;

  mutable std::mutex mu_;        // state: topology, notifications, subs
  std::mutex process_mu_;        // single writer through the vote path
  std::unique_ptr<Http> http_;
};

}  // namespace service
}  // namespace topomgr
