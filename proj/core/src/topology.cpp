#include "topomgr/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "json_convert.hpp"

namespace topomgr {

using nlohmann::json;

std::string to_string(Scenario s) { return s == Scenario::A ? "A" : "B"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Scenario::A;
  if (s == "B" || s == "b") return Scenario::B;
  throw ConfigError("unknown scenario: " + s);
}

double euclidean(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

const SubNetwork* TopologySnapshot::find_subnetwork(const std::string& id) const {
  for (const auto& s : subnetworks)
    if (s.id == id) return &s;
  return nullptr;
}

const Link* TopologySnapshot::find_link(const std::string& id) const {
  for (const auto& l : links)
    if (l.id == id) return &l;
  return nullptr;
}

const Ue* TopologySnapshot::find_ue(const std::string& id) const {
  for (const auto& u : ues)
    if (u.id == id) return &u;
  return nullptr;
}

const Evo* TopologySnapshot::find_evo(const std::string& id) const {
  for (const auto& e : evos)
    if (e.id == id) return &e;
  return nullptr;
}

const Association* TopologySnapshot::find_association(const std::string& ue_id) const {
  for (const auto& a : associations)
    if (a.ue == ue_id) return &a;
  return nullptr;
}

const SubNetwork* TopologySnapshot::home_subnetwork(const std::string& ue_id) const {
  for (const auto& s : subnetworks)
    for (const auto& u : s.ues)
      if (u == ue_id) return &s;
  return nullptr;
}

namespace {

void check_unique(std::set<std::string>& seen, const std::string& id,
                  const char* what) {
  if (id.empty()) throw ValidationError(std::string(what) + " with empty id");
  if (!seen.insert(id).second)
    throw ValidationError(std::string("duplicate id: ") + id);
}

}  // namespace

TopologySnapshot build_topology(const TopologySpec& spec) {
  TopologySnapshot snap;
  snap.version = 0;
  snap.subnetworks = spec.subnetworks;
  snap.links = spec.links;
  snap.ues = spec.ues;
  snap.evos = spec.evos;
  snap.associations = spec.associations;

  std::set<std::string> ids;
  for (const auto& s : snap.subnetworks) {
    check_unique(ids, s.id, "subnetwork");
    check_unique(ids, s.access_point.id, "access point");
    if (s.access_point.coverage_radius <= 0)
      throw ValidationError("coverage_radius must be > 0: " + s.access_point.id);
  }
  for (const auto& u : snap.ues) {
    check_unique(ids, u.id, "ue");
    if (u.velocity < 0) throw ValidationError("ue velocity must be >= 0: " + u.id);
  }
  for (const auto& e : snap.evos) check_unique(ids, e.id, "evo");

  std::set<std::string> link_ids;
  for (const auto& l : snap.links) {
    check_unique(link_ids, l.id, "link");
    if (!ids.count(l.endpoint_a))
      throw ValidationError("dangling link endpoint: " + l.endpoint_a);
    if (!ids.count(l.endpoint_b))
      throw ValidationError("dangling link endpoint: " + l.endpoint_b);
    if (l.bandwidth <= 0)
      throw ValidationError("link bandwidth must be > 0: " + l.id);
    if (l.delay < 0) throw ValidationError("link delay must be >= 0: " + l.id);
    if (l.loss < 0 || l.loss > 1)
      throw ValidationError("link loss must be in [0,1]: " + l.id);
  }

  int parents = 0;
  for (const auto& s : snap.subnetworks) parents += s.parent ? 1 : 0;
  if (parents > 1) throw ValidationError("more than one parent sub-network");

  // Member lists must reference declared entities, each entity at most once.
  std::set<std::string> member_seen;
  for (const auto& s : snap.subnetworks) {
    for (const auto& uid : s.ues) {
      if (!snap.find_ue(uid))
        throw ValidationError("subnetwork " + s.id + " lists unknown ue: " + uid);
      if (!member_seen.insert(uid).second)
        throw ValidationError("ue in more than one subnetwork: " + uid);
    }
    for (const auto& eid : s.evos) {
      const Evo* e = snap.find_evo(eid);
      if (!e)
        throw ValidationError("subnetwork " + s.id + " lists unknown evo: " + eid);
      if (!e->host_subnetwork.empty() && e->host_subnetwork != s.id)
        throw ValidationError("evo " + eid + " host_subnetwork disagrees with membership");
    }
  }
  for (auto& e : snap.evos) {
    if (!e.host_subnetwork.empty() && !snap.find_subnetwork(e.host_subnetwork))
      throw ValidationError("evo " + e.id + " hosted in unknown subnetwork");
  }

  // A parent-dependent sub-network needs a backhaul link from its access
  // point to a node of the parent sub-network.
  for (const auto& s : snap.subnetworks) {
    if (s.kind != SubNetworkKind::ParentDependent) continue;
    if (parents == 0)
      throw ValidationError("parent-dependent subnetwork " + s.id +
                            " but no parent sub-network declared");
    const SubNetwork* parent = nullptr;
    for (const auto& p : snap.subnetworks)
      if (p.parent) parent = &p;
    auto in_parent = [&](const std::string& node) {
      if (node == parent->access_point.id) return true;
      for (const auto& m : parent->ues)
        if (m == node) return true;
      for (const auto& m : parent->evos)
        if (m == node) return true;
      return false;
    };
    bool has_backhaul = false;
    for (const auto& l : snap.links) {
      if ((l.endpoint_a == s.access_point.id && in_parent(l.endpoint_b)) ||
          (l.endpoint_b == s.access_point.id && in_parent(l.endpoint_a)))
        has_backhaul = true;
    }
    if (!has_backhaul)
      throw ValidationError("parent-dependent subnetwork " + s.id +
                            " has no backhaul link");
  }

  std::set<std::string> assoc_ues;
  for (auto& a : snap.associations) {
    if (!snap.find_ue(a.ue))
      throw ValidationError("association references unknown ue: " + a.ue);
    if (!snap.find_evo(a.evo))
      throw ValidationError("association references unknown evo: " + a.evo);
    if (!assoc_ues.insert(a.ue).second)
      throw ValidationError("more than one association for ue: " + a.ue);
    a.since_version = 0;
  }

  // Default coverage: a UE starts covered by its home sub-network unless
  // the spec says otherwise.
  for (auto& u : snap.ues) {
    if (u.covered && u.covering_subnetwork.empty()) {
      const SubNetwork* home = snap.home_subnetwork(u.id);
      if (home) u.covering_subnetwork = home->id;
    }
    if (!u.covered) u.covering_subnetwork.clear();
  }
  return snap;
}

TopologySnapshot apply_change(const TopologySnapshot& snap,
                              const ChangeEvent& event) {
  TopologySnapshot next = snap;
  next.version = snap.version + 1;

  if (event.label < 0 || event.label > 3)
    throw DataError("change label out of range");

  if (event.scenario == Scenario::A) {
    if (snap.find_ue(event.subject))
      throw DataError("scenario/subject mismatch: " + event.subject);
    if (!snap.find_link(event.subject))
      throw DataError("unknown subject id: " + event.subject);
    if (event.detail.coverage)
      throw DataError("coverage detail on a scenario-A event");
  } else {
    if (snap.find_link(event.subject))
      throw DataError("scenario/subject mismatch: " + event.subject);
    if (!snap.find_ue(event.subject))
      throw DataError("unknown subject id: " + event.subject);
    if (event.detail.link)
      throw DataError("link detail on a scenario-B event");
  }

  if (event.detail.link) {
    for (auto& l : next.links) {
      if (l.id != event.subject) continue;
      const LinkDetail& d = *event.detail.link;
      if (d.bandwidth) l.bandwidth = *d.bandwidth;
      if (d.delay) l.delay = *d.delay;
      if (d.loss) l.loss = *d.loss;
    }
  }
  if (event.detail.coverage) {
    for (auto& u : next.ues) {
      if (u.id != event.subject) continue;
      const CoverageDetail& d = *event.detail.coverage;
      u.covered = d.covered;
      if (d.covering_subnetwork) u.covering_subnetwork = *d.covering_subnetwork;
      if (!d.covered) u.covering_subnetwork.clear();
      if (d.position) u.position = *d.position;
    }
  }
  for (const auto& a : event.detail.new_associations) {
    if (!snap.find_ue(a.ue)) throw DataError("association for unknown ue: " + a.ue);
    if (!snap.find_evo(a.evo)) throw DataError("association to unknown evo: " + a.evo);
    bool replaced = false;
    for (auto& cur : next.associations) {
      if (cur.ue == a.ue) {
        cur.evo = a.evo;
        cur.since_version = next.version;
        replaced = true;
      }
    }
    if (!replaced)
      next.associations.push_back({a.ue, a.evo, next.version});
  }
  for (const auto& uid : event.detail.removed_associations) {
    std::erase_if(next.associations,
                  [&](const Association& a) { return a.ue == uid; });
  }

  next.event_log.push_back(event);
  return next;
}

TopologySnapshot replay(const TopologySnapshot& initial,
                        const std::vector<ChangeEvent>& events) {
  TopologySnapshot snap = initial;
  for (const auto& e : events) snap = apply_change(snap, e);
  return snap;
}

namespace {

// End-to-end path quality, ordered lexicographically: loss ascending,
// then delay ascending, then bandwidth descending. Extending a path can
// never improve the score, which keeps Dijkstra applicable.
struct PathScore {
  double loss = 0.0;
  double delay = 0.0;
  double bandwidth = std::numeric_limits<double>::infinity();

  PathScore extend(const Link& l) const {
    return {1.0 - (1.0 - loss) * (1.0 - l.loss), delay + l.delay,
            std::min(bandwidth, l.bandwidth)};
  }
  bool operator<(const PathScore& o) const {
    if (loss != o.loss) return loss < o.loss;
    if (delay != o.delay) return delay < o.delay;
    return bandwidth > o.bandwidth;
  }
};

std::optional<PathScore> best_path(const TopologySnapshot& snap,
                                   const std::string& from,
                                   const std::string& to) {
  if (from == to) return PathScore{};
  std::map<std::string, std::vector<const Link*>> adj;
  for (const auto& l : snap.links) {
    adj[l.endpoint_a].push_back(&l);
    adj[l.endpoint_b].push_back(&l);
  }
  std::map<std::string, PathScore> best;
  using Item = std::pair<PathScore, std::string>;
  auto cmp = [](const Item& a, const Item& b) { return b.first < a.first; };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> pq(cmp);
  best[from] = PathScore{};
  pq.push({PathScore{}, from});
  while (!pq.empty()) {
    auto [score, node] = pq.top();
    pq.pop();
    auto it = best.find(node);
    if (it != best.end() && it->second < score) continue;
    if (node == to) return score;
    for (const Link* l : adj[node]) {
      const std::string& other = l->endpoint_a == node ? l->endpoint_b : l->endpoint_a;
      PathScore cand = score.extend(*l);
      auto bi = best.find(other);
      if (bi == best.end() || cand < bi->second) {
        best[other] = cand;
        pq.push({cand, other});
      }
    }
  }
  return std::nullopt;
}

const SubNetwork* host_of_evo(const TopologySnapshot& snap, const Evo& evo) {
  if (!evo.host_subnetwork.empty())
    return snap.find_subnetwork(evo.host_subnetwork);
  for (const auto& s : snap.subnetworks)
    for (const auto& eid : s.evos)
      if (eid == evo.id) return &s;
  return nullptr;
}

ReassocResult pick_local_evo(const TopologySnapshot& snap, const Ue& ue,
                             const std::string& subnet_id) {
  const Evo* chosen = nullptr;
  for (const auto& e : snap.evos) {
    const SubNetwork* host = host_of_evo(snap, e);
    if (!host || host->id != subnet_id) continue;
    if (!chosen) {
      chosen = &e;
      continue;
    }
    // master role first, then lowest id
    auto rank = [](const Evo& x) { return x.role == EvoRole::Master ? 0 : 1; };
    if (std::pair(rank(e), e.id) < std::pair(rank(*chosen), chosen->id))
      chosen = &e;
  }
  if (!chosen) return {};
  return {ReassocResult::Status::Associated, {ue.id, chosen->id, snap.version}};
}

}  // namespace

ReassocResult reassociate(const TopologySnapshot& snap, const std::string& ue_id,
                          const ReassociationPolicy& policy) {
  const Ue* ue = snap.find_ue(ue_id);
  if (!ue) throw DataError("unknown ue: " + ue_id);

  if (policy.scenario == Scenario::B) {
    if (ue->covered && !ue->covering_subnetwork.empty()) {
      ReassocResult r = pick_local_evo(snap, *ue, ue->covering_subnetwork);
      if (r.status == ReassocResult::Status::Associated) return r;
    }
    if (policy.fallback_evo && snap.find_evo(*policy.fallback_evo))
      return {ReassocResult::Status::Associated,
              {ue->id, *policy.fallback_evo, snap.version}};
    return {};
  }

  // Scenario A: best path from the UE's sub-network to each EVO's host.
  const SubNetwork* home = snap.home_subnetwork(ue_id);
  if (!home) return {};
  const Evo* chosen = nullptr;
  PathScore chosen_score;
  for (const auto& e : snap.evos) {
    const SubNetwork* host = host_of_evo(snap, e);
    if (!host) continue;
    std::optional<PathScore> score =
        best_path(snap, home->access_point.id, host->access_point.id);
    if (!score) continue;
    auto rank = [](const Evo& x) { return x.role == EvoRole::Master ? 0 : 1; };
    if (!chosen || *score < chosen_score ||
        (!(chosen_score < *score) &&
         std::pair(rank(e), e.id) < std::pair(rank(*chosen), chosen->id))) {
      chosen = &e;
      chosen_score = *score;
    }
  }
  if (!chosen) return {};
  return {ReassocResult::Status::Associated, {ue_id, chosen->id, snap.version}};
}

// ---------------------------------------------------------------------------
// JSON (topology file + service payloads)

namespace {

json point_to_json(const Point& p) { return json{{"x", p.x}, {"y", p.y}}; }

Point point_from_json(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>()};
}

json ap_to_json(const AccessPoint& ap) {
  return json{{"id", ap.id},
              {"position", point_to_json(ap.position)},
              {"channel", ap.channel},
              {"mode", ap.mode},
              {"tx_power", ap.tx_power},
              {"coverage_radius", ap.coverage_radius}};
}

AccessPoint ap_from_json(const json& j) {
  AccessPoint ap;
  ap.id = j.at("id").get<std::string>();
  if (j.contains("position")) ap.position = point_from_json(j.at("position"));
  ap.channel = j.value("channel", 1);
  ap.mode = j.value("mode", std::string("g"));
  ap.tx_power = j.value("tx_power", 20.0);
  ap.coverage_radius = j.value("coverage_radius", 100.0);
  return ap;
}

std::string kind_to_string(SubNetworkKind k) {
  return k == SubNetworkKind::Autonomous ? "autonomous" : "parent-dependent";
}

SubNetworkKind kind_from_string(const std::string& s) {
  if (s == "autonomous") return SubNetworkKind::Autonomous;
  if (s == "parent-dependent") return SubNetworkKind::ParentDependent;
  throw ConfigError("unknown subnetwork kind: " + s);
}

json subnetwork_to_json(const SubNetwork& s) {
  return json{{"id", s.id},
              {"kind", kind_to_string(s.kind)},
              {"parent", s.parent},
              {"access_point", ap_to_json(s.access_point)},
              {"ues", s.ues},
              {"evos", s.evos}};
}

json link_to_json(const Link& l) {
  return json{{"id", l.id},
              {"endpoints", json::array({l.endpoint_a, l.endpoint_b})},
              {"bandwidth", l.bandwidth},
              {"delay", l.delay},
              {"loss", l.loss}};
}

json ue_to_json(const Ue& u) {
  json j{{"id", u.id},
         {"position", point_to_json(u.position)},
         {"velocity", u.velocity},
         {"covered", u.covered}};
  if (!u.covering_subnetwork.empty())
    j["covering_subnetwork"] = u.covering_subnetwork;
  return j;
}

json evo_to_json(const Evo& e) {
  return json{{"id", e.id},
              {"role", e.role == EvoRole::Master ? "master" : "distributor"},
              {"host_subnetwork", e.host_subnetwork}};
}

json association_to_json(const Association& a) {
  return json{{"ue", a.ue}, {"evo", a.evo}, {"since_version", a.since_version}};
}

}  // namespace

TopologySpec parse_topology_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("topology file is not valid JSON: ") + e.what());
  }
  TopologySpec spec;
  try {
    spec.format_version = j.value("format_version", 1);
    if (spec.format_version != 1)
      throw ConfigError("unsupported topology format_version");
    for (const auto& js : j.value("subnetworks", json::array())) {
      SubNetwork s;
      s.id = js.at("id").get<std::string>();
      s.kind = kind_from_string(js.value("kind", std::string("autonomous")));
      s.parent = js.value("parent", false);
      if (js.contains("access_point")) s.access_point = ap_from_json(js.at("access_point"));
      s.ues = js.value("ues", std::vector<std::string>{});
      s.evos = js.value("evos", std::vector<std::string>{});
      spec.subnetworks.push_back(std::move(s));
    }
    for (const auto& jl : j.value("links", json::array())) {
      Link l;
      l.id = jl.at("id").get<std::string>();
      const auto& ep = jl.at("endpoints");
      if (!ep.is_array() || ep.size() != 2)
        throw ConfigError("link endpoints must be a pair: " + l.id);
      l.endpoint_a = ep[0].get<std::string>();
      l.endpoint_b = ep[1].get<std::string>();
      l.bandwidth = jl.value("bandwidth", 100.0);
      l.delay = jl.value("delay", 0.0);
      l.loss = jl.value("loss", 0.0);
      spec.links.push_back(std::move(l));
    }
    for (const auto& ju : j.value("ues", json::array())) {
      Ue u;
      u.id = ju.at("id").get<std::string>();
      if (ju.contains("position")) u.position = point_from_json(ju.at("position"));
      u.velocity = ju.value("velocity", 0.0);
      u.covered = ju.value("covered", true);
      u.covering_subnetwork = ju.value("covering_subnetwork", std::string());
      spec.ues.push_back(std::move(u));
    }
    for (const auto& je : j.value("evos", json::array())) {
      Evo e;
      e.id = je.at("id").get<std::string>();
      std::string role = je.value("role", std::string("master"));
      if (role == "master")
        e.role = EvoRole::Master;
      else if (role == "distributor")
        e.role = EvoRole::Distributor;
      else
        throw ConfigError("unknown evo role: " + role);
      e.host_subnetwork = je.value("host_subnetwork", std::string());
      spec.evos.push_back(std::move(e));
    }
    for (const auto& ja : j.value("associations", json::array())) {
      Association a;
      a.ue = ja.at("ue").get<std::string>();
      a.evo = ja.at("evo").get<std::string>();
      spec.associations.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed topology file: ") + e.what());
  }
  return spec;
}

TopologySpec load_topology_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open topology file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_topology_spec(ss.str());
}

namespace detail {

json event_to_json(const ChangeEvent& e) {
  json j{{"scenario", to_string(e.scenario)},
         {"label", e.label},
         {"subject", e.subject}};
  json d = json::object();
  if (e.detail.link) {
    json l = json::object();
    if (e.detail.link->bandwidth) l["bandwidth"] = *e.detail.link->bandwidth;
    if (e.detail.link->delay) l["delay"] = *e.detail.link->delay;
    if (e.detail.link->loss) l["loss"] = *e.detail.link->loss;
    d["link"] = l;
  }
  if (e.detail.coverage) {
    json c{{"covered", e.detail.coverage->covered}};
    if (e.detail.coverage->covering_subnetwork)
      c["covering_subnetwork"] = *e.detail.coverage->covering_subnetwork;
    if (e.detail.coverage->position)
      c["position"] = point_to_json(*e.detail.coverage->position);
    d["coverage"] = c;
  }
  if (!e.detail.new_associations.empty()) {
    json arr = json::array();
    for (const auto& a : e.detail.new_associations)
      arr.push_back(json{{"ue", a.ue}, {"evo", a.evo}});
    d["new_associations"] = arr;
  }
  if (!e.detail.removed_associations.empty())
    d["removed_associations"] = e.detail.removed_associations;
  j["detail"] = d;
  return j;
}

ChangeEvent event_from_json(const json& j) {
  ChangeEvent e;
  e.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  e.label = j.at("label").get<int>();
  e.subject = j.at("subject").get<std::string>();
  const json d = j.value("detail", json::object());
  if (d.contains("link")) {
    LinkDetail l;
    if (d["link"].contains("bandwidth")) l.bandwidth = d["link"]["bandwidth"].get<double>();
    if (d["link"].contains("delay")) l.delay = d["link"]["delay"].get<double>();
    if (d["link"].contains("loss")) l.loss = d["link"]["loss"].get<double>();
    e.detail.link = l;
  }
  if (d.contains("coverage")) {
    CoverageDetail c;
    c.covered = d["coverage"].at("covered").get<bool>();
    if (d["coverage"].contains("covering_subnetwork"))
      c.covering_subnetwork = d["coverage"]["covering_subnetwork"].get<std::string>();
    if (d["coverage"].contains("position"))
      c.position = point_from_json(d["coverage"]["position"]);
    e.detail.coverage = c;
  }
  for (const auto& ja : d.value("new_associations", json::array()))
    e.detail.new_associations.push_back(
        {ja.at("ue").get<std::string>(), ja.at("evo").get<std::string>(), 0});
  for (const auto& ju : d.value("removed_associations", json::array()))
    e.detail.removed_associations.push_back(ju.get<std::string>());
  return e;
}

json snapshot_to_json(const TopologySnapshot& snap) {
  json j;
  j["version"] = snap.version;
  j["subnetworks"] = json::array();
  for (const auto& s : snap.subnetworks) j["subnetworks"].push_back(subnetwork_to_json(s));
  j["links"] = json::array();
  for (const auto& l : snap.links) j["links"].push_back(link_to_json(l));
  j["ues"] = json::array();
  for (const auto& u : snap.ues) j["ues"].push_back(ue_to_json(u));
  j["evos"] = json::array();
  for (const auto& e : snap.evos) j["evos"].push_back(evo_to_json(e));
  j["associations"] = json::array();
  for (const auto& a : snap.associations) j["associations"].push_back(association_to_json(a));
  j["event_log"] = json::array();
  for (const auto& e : snap.event_log) j["event_log"].push_back(event_to_json(e));
  return j;
}

}  // namespace detail

std::string topology_to_json(const TopologySnapshot& snap, int indent) {
  return detail::snapshot_to_json(snap).dump(indent);
}

}  // namespace topomgr
