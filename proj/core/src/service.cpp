#include "topomgr/service.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "json_convert.hpp"
#include "topomgr/provenance.hpp"

namespace topomgr {
namespace service {

using nlohmann::json;
namespace fs = std::filesystem;

ServiceConfig parse_service_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("service config is not valid JSON: ") + e.what());
  }
  ServiceConfig cfg;
  cfg.topology_path = j.value("topology", std::string());
  cfg.model_dir = j.value("model_dir", std::string());
  cfg.port = j.value("port", cfg.port);
  cfg.notification_log = j.value("notification_log", std::string());
  if (j.contains("fallback_evo"))
    cfg.fallback_evo = j["fallback_evo"].get<std::string>();
  if (j.contains("bottleneck")) {
    cfg.bottleneck_bandwidth = j["bottleneck"].value("bandwidth", cfg.bottleneck_bandwidth);
    cfg.bottleneck_loss = j["bottleneck"].value("loss", cfg.bottleneck_loss);
    cfg.bottleneck_delay = j["bottleneck"].value("delay", cfg.bottleneck_delay);
  }
  if (cfg.topology_path.empty())
    throw ConfigError("service config needs a 'topology' path");
  return cfg;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open service config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_service_config(ss.str());
}

// --- notification JSON ------------------------------------------------------

namespace {

json notification_json(const ChangeNotification& n) {
  json j;
  j["id"] = n.id;
  j["created_at"] = n.created_at;
  j["scenario"] = to_string(n.scenario);
  j["label"] = n.label;
  j["subject"] = n.subject;
  json votes = json::array();
  for (const auto& v : n.votes)
    votes.push_back(json{{"model_id", v.model_id}, {"rank", v.rank}, {"vote", v.vote}});
  j["votes"] = votes;
  j["event"] = detail::event_to_json(n.event);
  json assoc = json::array();
  for (const auto& a : n.associations)
    assoc.push_back(json{{"ue", a.ue}, {"evo", a.evo}, {"since_version", a.since_version}});
  j["associations"] = assoc;
  j["unreachable"] = n.unreachable;
  j["snapshot_version"] = n.snapshot_version;
  return j;
}

ChangeNotification notification_from_json(const json& j) {
  ChangeNotification n;
  n.id = j.at("id").get<std::uint64_t>();
  n.created_at = j.value("created_at", std::string());
  n.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  n.label = j.at("label").get<int>();
  n.subject = j.at("subject").get<std::string>();
  for (const auto& jv : j.value("votes", json::array()))
    n.votes.push_back({jv.at("model_id").get<std::string>(),
                       jv.at("rank").get<int>(), jv.at("vote").get<int>()});
  n.event = detail::event_from_json(j.at("event"));
  for (const auto& ja : j.value("associations", json::array()))
    n.associations.push_back({ja.at("ue").get<std::string>(),
                              ja.at("evo").get<std::string>(),
                              ja.value("since_version", std::uint64_t{0})});
  for (const auto& ju : j.value("unreachable", json::array()))
    n.unreachable.push_back(ju.get<std::string>());
  n.snapshot_version = j.at("snapshot_version").get<std::uint64_t>();
  return n;
}

}  // namespace

std::string notification_to_json(const ChangeNotification& n, int indent) {
  return notification_json(n).dump(indent);
}

std::vector<ChangeNotification> parse_notifications_json(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed notifications payload: ") + e.what());
  }
  const json& arr = j.is_array() ? j : j.at("notifications");
  std::vector<ChangeNotification> out;
  for (const auto& jn : arr) out.push_back(notification_from_json(jn));
  return out;
}

// --- model runtime ----------------------------------------------------------

struct TopologyService::ScenarioRuntime {
  Scenario scenario = Scenario::A;
  pipeline::TopN top;
  int window = 1;
  int horizon = 0;
  pipeline::FeatureWindower windower{1};
  std::vector<ModelInfo> infos;
};

namespace {

std::unique_ptr<TopologyService::ScenarioRuntime> load_runtime(
    const std::string& dir, Scenario scenario);

}  // namespace

// --- service core -----------------------------------------------------------

TopologyService::TopologyService(const ServiceConfig& cfg) : cfg_(cfg) {
  initial_ = build_topology(load_topology_spec(cfg.topology_path));
  current_ = initial_;
  load_models_locked();
}

TopologyService::~TopologyService() { stop(); }

void TopologyService::load_models_locked() {
  runtime_a_.reset();
  runtime_b_.reset();
  if (cfg_.model_dir.empty())
    throw ConfigError("not ready: no model directory configured");
  runtime_a_ = load_runtime(cfg_.model_dir, Scenario::A);
  runtime_b_ = load_runtime(cfg_.model_dir, Scenario::B);
  if (!runtime_a_ && !runtime_b_)
    throw ConfigError("not ready: no Top-N manifest found in " + cfg_.model_dir);
}

void TopologyService::reload_models() {
  std::scoped_lock lock(process_mu_, mu_);
  load_models_locked();
}

bool TopologyService::ready(Scenario scenario) const {
  std::lock_guard lock(mu_);
  return scenario == Scenario::A ? runtime_a_ != nullptr : runtime_b_ != nullptr;
}

IngestResult TopologyService::ingest_sample(
    const pipeline::MonitoringSample& sample) {
  if (sample.subject.empty()) return {false, 0, "missing subject"};
  std::lock_guard lock(mu_);
  pipeline::SelectResult sel = selector_.select(sample);
  if (sel.status == pipeline::SelectStatus::Rejected)
    return {false, 0, sel.reason};

  const auto* rt = sel.scenario == Scenario::A ? runtime_a_.get() : runtime_b_.get();
  if (!rt)
    return {false, 0,
            "not ready: no models loaded for scenario " + to_string(sel.scenario)};

  if (sel.scenario == Scenario::A) {
    if (!current_.find_link(sample.subject))
      return {false, 0, "unknown subject id: " + sample.subject};
  } else if (!current_.find_ue(sample.subject)) {
    return {false, 0, "unknown subject id: " + sample.subject};
  }

  const std::uint64_t token = next_token_++;
  if (sel.status == pipeline::SelectStatus::Dropped)
    return {true, token, "dropped: needed parameters unchanged"};
  queue_.push_back({token, sel.scenario, sample.subject,
                    std::move(sel.features), sample.fields});
  return {true, token, ""};
}

std::vector<ChangeNotification> TopologyService::process_pending() {
  std::lock_guard plock(process_mu_);
  return process_locked();
}

std::vector<ChangeNotification> TopologyService::process_locked() {
  std::vector<ChangeNotification> produced;
  while (true) {
    QueuedSample item;
    {
      std::lock_guard lock(mu_);
      if (queue_.empty()) break;
      item = std::move(queue_.front());
      queue_.pop_front();
    }
    ScenarioRuntime* rt = nullptr;
    {
      std::lock_guard lock(mu_);
      rt = item.scenario == Scenario::A ? runtime_a_.get() : runtime_b_.get();
    }
    if (!rt) continue;

    const auto windowed = rt->windower.push(item.subject, item.features);
    if (!windowed) continue;  // not enough history for this subject yet

    const pipeline::VoteDetail votes = pipeline::vote_detail(rt->top, *windowed);
    if (votes.decision == 0) continue;  // no change predicted

    ChangeNotification n =
        apply_vote(*rt, item.scenario, item.subject, votes, item.fields);
    produced.push_back(n);
    deliver(n);
  }
  return produced;
}

namespace {

// Nearest sub-network whose access point covers the position.
const SubNetwork* covering_subnetwork(const TopologySnapshot& snap,
                                      const Point& position) {
  const SubNetwork* best = nullptr;
  double best_d = 0.0;
  for (const auto& s : snap.subnetworks) {
    const double d = euclidean(position, s.access_point.position);
    if (d > s.access_point.coverage_radius) continue;
    if (!best || d < best_d || (d == best_d && s.id < best->id)) {
      best = &s;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

ChangeNotification TopologyService::apply_vote(
    ScenarioRuntime& rt, Scenario scenario, const std::string& subject,
    const pipeline::VoteDetail& votes,
    const std::map<std::string, double>& fields) {
  std::lock_guard lock(mu_);

  ChangeEvent event;
  event.scenario = scenario;
  event.label = votes.decision;
  event.subject = subject;

  std::vector<std::string> reassoc_targets;
  ReassociationPolicy policy;
  if (scenario == Scenario::A) {
    LinkDetail ld;
    switch (votes.decision) {
      case 1: ld.bandwidth = cfg_.bottleneck_bandwidth; break;
      case 2: ld.loss = cfg_.bottleneck_loss; break;
      case 3: ld.delay = cfg_.bottleneck_delay; break;
      default: break;
    }
    event.detail.link = ld;
    policy.scenario = Scenario::A;
    for (const auto& s : current_.subnetworks) {
      if (s.kind != SubNetworkKind::ParentDependent) continue;
      for (const auto& ue : s.ues) reassoc_targets.push_back(ue);
    }
  } else {
    CoverageDetail cd;
    cd.covered = votes.decision == 3;  // 1 exit, 2 still outside, 3 re-enter
    Point pos{};
    auto xit = fields.find("x_m");
    auto yit = fields.find("y_m");
    if (xit != fields.end() && yit != fields.end()) {
      pos = {xit->second, yit->second};
      cd.position = pos;
    } else if (const Ue* ue = current_.find_ue(subject)) {
      pos = ue->position;
    }
    if (cd.covered) {
      const SubNetwork* cover = covering_subnetwork(current_, pos);
      if (!cover) cover = current_.home_subnetwork(subject);
      if (cover) cd.covering_subnetwork = cover->id;
    }
    event.detail.coverage = cd;
    policy.scenario = Scenario::B;
    policy.fallback_evo = cfg_.fallback_evo;
    reassoc_targets.push_back(subject);
  }

  // Re-associate against the tentative post-change topology, then fold
  // the chosen associations into the event so one apply_change (and one
  // version bump) carries the whole transition and stays replayable.
  const TopologySnapshot tentative = apply_change(current_, event);
  ChangeNotification n;
  for (const auto& ue : reassoc_targets) {
    const ReassocResult r = reassociate(tentative, ue, policy);
    const Association* cur = current_.find_association(ue);
    if (r.status == ReassocResult::Status::Associated) {
      if (!cur || cur->evo != r.association.evo)
        event.detail.new_associations.push_back(r.association);
    } else if (cur) {
      event.detail.removed_associations.push_back(ue);
      n.unreachable.push_back(ue);
    } else {
      n.unreachable.push_back(ue);
    }
  }

  current_ = apply_change(current_, event);

  n.id = current_.version;
  n.created_at = iso8601_utc_now();
  n.scenario = scenario;
  n.label = votes.decision;
  n.subject = subject;
  for (std::size_t i = 0; i < votes.votes.size(); ++i)
    n.votes.push_back({rt.top.entries[i].report.model_id,
                       static_cast<int>(i), votes.votes[i]});
  n.event = event;
  for (const auto& a : event.detail.new_associations) {
    Association applied = a;
    applied.since_version = current_.version;
    n.associations.push_back(applied);
  }
  n.snapshot_version = current_.version;

  notifications_.push_back(n);
  append_log(n);
  return n;
}

void TopologyService::append_log(const ChangeNotification& n) {
  if (cfg_.notification_log.empty()) return;
  std::ofstream out(cfg_.notification_log, std::ios::app | std::ios::binary);
  if (!out) return;
  out << notification_to_json(n) << "\n";
}

namespace {

bool filter_matches(const SubscriptionFilter& f, const ChangeNotification& n) {
  if (f.scenario && *f.scenario != n.scenario) return false;
  if (!f.labels.empty() && !f.labels.count(n.label)) return false;
  return true;
}

}  // namespace

void TopologyService::deliver(const ChangeNotification& n) {
  std::vector<Subscription> hooks;
  {
    std::lock_guard lock(mu_);
    for (const auto& s : subscriptions_)
      if (s.delivery == "webhook" && filter_matches(s.filter, n))
        hooks.push_back(s);
  }
  for (const auto& s : hooks) {
    // best effort; long-poll cursors remain the reliable path
    auto split = s.callback_url.find('/', s.callback_url.find("//") + 2);
    const std::string host = split == std::string::npos
                                 ? s.callback_url
                                 : s.callback_url.substr(0, split);
    const std::string path =
        split == std::string::npos ? "/" : s.callback_url.substr(split);
    httplib::Client client(host);
    client.set_connection_timeout(1, 0);
    client.Post(path, notification_to_json(n), "application/json");
  }
}

TopologySnapshot TopologyService::topology() const {
  std::lock_guard lock(mu_);
  return current_;
}

TopologySnapshot TopologyService::initial_topology() const {
  std::lock_guard lock(mu_);
  return initial_;
}

Subscription TopologyService::subscribe(const SubscriptionFilter& filter,
                                        const std::string& delivery,
                                        const std::string& callback_url) {
  for (int label : filter.labels)
    if (!data::is_valid_label(label))
      throw ConfigError("subscription filter label out of range");
  if (delivery != "long_poll" && delivery != "webhook")
    throw ConfigError("unknown delivery mode: " + delivery);
  if (delivery == "webhook" && callback_url.empty())
    throw ConfigError("webhook delivery needs a callback url");
  std::lock_guard lock(mu_);
  Subscription s;
  s.id = next_subscription_++;
  s.filter = filter;
  s.delivery = delivery;
  s.callback_url = callback_url;
  s.created_at = iso8601_utc_now();
  subscriptions_.push_back(s);
  return s;
}

std::vector<ChangeNotification> TopologyService::notifications_since(
    std::uint64_t since) const {
  std::lock_guard lock(mu_);
  std::vector<ChangeNotification> out;
  for (const auto& n : notifications_)
    if (n.snapshot_version > since) out.push_back(n);
  return out;
}

std::vector<ChangeNotification> TopologyService::subscription_notifications(
    std::uint64_t subscription_id, std::uint64_t since) const {
  std::lock_guard lock(mu_);
  const Subscription* sub = nullptr;
  for (const auto& s : subscriptions_)
    if (s.id == subscription_id) sub = &s;
  if (!sub) throw DataError("unknown subscription id");
  std::vector<ChangeNotification> out;
  for (const auto& n : notifications_)
    if (n.snapshot_version > since && filter_matches(sub->filter, n))
      out.push_back(n);
  return out;
}

std::vector<ModelInfo> TopologyService::models_info() const {
  std::lock_guard lock(mu_);
  std::vector<ModelInfo> out;
  for (const auto* rt : {runtime_a_.get(), runtime_b_.get()}) {
    if (!rt) continue;
    out.insert(out.end(), rt->infos.begin(), rt->infos.end());
  }
  return out;
}

// --- model loading ----------------------------------------------------------

namespace {

std::unique_ptr<TopologyService::ScenarioRuntime> load_runtime(
    const std::string& dir, Scenario scenario) {
  const fs::path manifest_path =
      fs::path(dir) / (scenario == Scenario::A ? "topn_a.json" : "topn_b.json");
  std::ifstream in(manifest_path);
  if (!in) return nullptr;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed Top-N manifest " + manifest_path.string() +
                      ": " + e.what());
  }
  auto rt = std::make_unique<TopologyService::ScenarioRuntime>();
  rt->scenario = scenario;
  rt->window = j.value("window", 1);
  rt->horizon = j.value("horizon", 0);
  rt->windower = pipeline::FeatureWindower(rt->window);
  int rank = 0;
  for (const auto& jm : j.value("models", json::array())) {
    const fs::path model_path = fs::path(dir) / jm.get<std::string>();
    ml::TrainedModel model = ml::load_model(model_path.string());
    pipeline::EvalReport rep;
    rep.model_id = model.id();
    rep.accuracy = model.eval_accuracy;
    rep.mse = model.eval_mse;
    ModelInfo info;
    info.scenario = scenario;
    info.model_id = rep.model_id;
    info.rank = rank++;
    info.digest = file_digest(model_path.string());
    info.accuracy = model.eval_accuracy;
    info.mse = model.eval_mse;
    info.window = rt->window;
    info.horizon = rt->horizon;
    rt->infos.push_back(info);
    rt->top.entries.push_back({std::move(model), std::move(rep)});
  }
  if (rt->top.entries.empty())
    throw ConfigError("Top-N manifest lists no models: " + manifest_path.string());
  return rt;
}

}  // namespace

// --- HTTP front end ---------------------------------------------------------

struct TopologyService::Http {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

namespace {

void reply_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(json{{"error", msg}}.dump(), "application/json");
}

json subscription_json(const Subscription& s) {
  json f = json::object();
  if (s.filter.scenario) f["scenario"] = to_string(*s.filter.scenario);
  if (!s.filter.labels.empty())
    f["labels"] = std::vector<int>(s.filter.labels.begin(), s.filter.labels.end());
  return json{{"id", s.id},
              {"filter", f},
              {"delivery", {{"mode", s.delivery}, {"url", s.callback_url}}},
              {"created_at", s.created_at}};
}

}  // namespace

void TopologyService::run() {
  stop();
  http_ = std::make_unique<Http>();
  setup_routes(http_->server);
  http_->port = cfg_.port;
  if (!http_->server.listen("0.0.0.0", cfg_.port))
    throw ConfigError("cannot listen on port " + std::to_string(cfg_.port));
}

int TopologyService::serve_on_any_port() {
  stop();
  http_ = std::make_unique<Http>();
  setup_routes(http_->server);
  auto& svr = http_->server;
  http_->port = svr.bind_to_any_port("127.0.0.1");
  http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return http_->port;
}

void TopologyService::setup_routes(httplib::Server& svr) {
  svr.Post("/v1/monitoring/samples", [this](const httplib::Request& req,
                                            httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      reply_error(res, 400, "body is not valid JSON");
      return;
    }
    pipeline::MonitoringSample sample;
    sample.subject = body.value("subject", std::string());
    for (const auto& [key, value] : body.items())
      if (value.is_number()) sample.fields[key] = value.get<double>();
    const IngestResult r = ingest_sample(sample);
    if (!r.accepted) {
      reply_error(res, r.reason.rfind("not ready", 0) == 0 ? 503 : 400, r.reason);
      return;
    }
    const auto produced = process_pending();
    json out{{"token", r.token}, {"status", "accepted"}};
    if (!r.reason.empty()) out["note"] = r.reason;
    out["notifications_produced"] = produced.size();
    res.status = 202;
    res.set_content(out.dump(), "application/json");
  });

  svr.Get("/v1/topology", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(topology_to_json(topology()), "application/json");
  });

  svr.Post("/v1/subscriptions", [this](const httplib::Request& req,
                                       httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      SubscriptionFilter filter;
      if (body.contains("filter")) {
        const json& f = body["filter"];
        if (f.contains("scenario"))
          filter.scenario = scenario_from_string(f["scenario"].get<std::string>());
        for (const auto& jl : f.value("labels", json::array()))
          filter.labels.insert(jl.get<int>());
      }
      std::string mode = "long_poll", url;
      if (body.contains("delivery")) {
        mode = body["delivery"].value("mode", mode);
        url = body["delivery"].value("url", url);
      }
      const Subscription s = subscribe(filter, mode, url);
      res.status = 201;
      res.set_content(subscription_json(s).dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });

  auto notifications_reply = [](httplib::Response& res,
                                const std::vector<ChangeNotification>& list) {
    json arr = json::array();
    std::uint64_t latest = 0;
    for (const auto& n : list) {
      arr.push_back(json::parse(notification_to_json(n)));
      latest = std::max(latest, n.snapshot_version);
    }
    res.set_content(json{{"notifications", arr}, {"latest_version", latest}}.dump(),
                    "application/json");
  };

  svr.Get("/v1/notifications", [this, notifications_reply](
                                   const httplib::Request& req,
                                   httplib::Response& res) {
    const std::uint64_t since =
        req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
    notifications_reply(res, notifications_since(since));
  });

  svr.Get(R"(/v1/subscriptions/(\d+)/notifications)",
          [this, notifications_reply](const httplib::Request& req,
                                      httplib::Response& res) {
            const std::uint64_t id = std::stoull(req.matches[1]);
            const std::uint64_t since =
                req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
            try {
              notifications_reply(res, subscription_notifications(id, since));
            } catch (const DataError& e) {
              reply_error(res, 404, e.what());
            }
          });

  svr.Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
    json arr = json::array();
    for (const auto& info : models_info())
      arr.push_back(json{{"scenario", to_string(info.scenario)},
                         {"model_id", info.model_id},
                         {"rank", info.rank},
                         {"digest", info.digest},
                         {"accuracy", info.accuracy},
                         {"mse", info.mse},
                         {"window", info.window},
                         {"horizon", info.horizon}});
    res.set_content(json{{"models", arr}}.dump(), "application/json");
  });

  svr.Post("/v1/admin/reload-models", [this](const httplib::Request&,
                                             httplib::Response& res) {
    try {
      reload_models();
      res.set_content(json{{"status", "reloaded"}}.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  });
}

void TopologyService::stop() {
  if (!http_) return;
  http_->server.stop();
  if (http_->thread.joinable()) http_->thread.join();
  http_.reset();
}

}  // namespace service
}  // namespace topomgr
