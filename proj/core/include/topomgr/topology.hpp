#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace topomgr {

// Error taxonomy shared across the library. The CLI maps these onto
// distinct exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : ConfigError {
  using ConfigError::ConfigError;
};

enum class Scenario { A, B };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

double euclidean(const Point& a, const Point& b);

struct AccessPoint {
  std::string id;
  Point position;
  int channel = 1;
  std::string mode = "g";
  double tx_power = 20.0;        // dBm
  double coverage_radius = 100;  // m
  bool operator==(const AccessPoint&) const = default;
};

enum class SubNetworkKind { Autonomous, ParentDependent };

struct SubNetwork {
  std::string id;
  SubNetworkKind kind = SubNetworkKind::Autonomous;
  bool parent = false;  // backhaul provider; at most one per snapshot
  AccessPoint access_point;
  std::vector<std::string> ues;
  std::vector<std::string> evos;
  bool operator==(const SubNetwork&) const = default;
};

struct Link {
  std::string id;
  std::string endpoint_a;
  std::string endpoint_b;
  double bandwidth = 100.0;  // Mbit/s, > 0
  double delay = 0.0;        // ms, >= 0
  double loss = 0.0;         // fraction in [0,1]
  bool operator==(const Link&) const = default;
};

struct Ue {
  std::string id;
  Point position;
  double velocity = 0.0;  // m/s, >= 0
  // Coverage state is decided by the simulator (or the service acting on
  // live samples) and carried on change events; the graph never
  // recomputes radio physics.
  bool covered = true;
  std::string covering_subnetwork;  // empty when not covered
  bool operator==(const Ue&) const = default;
};

enum class EvoRole { Master, Distributor };

struct Evo {
  std::string id;
  EvoRole role = EvoRole::Master;
  std::string host_subnetwork;
  bool operator==(const Evo&) const = default;
};

struct Association {
  std::string ue;
  std::string evo;
  std::uint64_t since_version = 0;
  bool operator==(const Association&) const = default;
};

// Optional per-field link update: only fields that are set change.
struct LinkDetail {
  std::optional<double> bandwidth;
  std::optional<double> delay;
  std::optional<double> loss;
  bool operator==(const LinkDetail&) const = default;
};

struct CoverageDetail {
  bool covered = false;
  std::optional<std::string> covering_subnetwork;
  std::optional<Point> position;
  bool operator==(const CoverageDetail&) const = default;
};

struct ChangeDetail {
  std::optional<LinkDetail> link;
  std::optional<CoverageDetail> coverage;
  std::vector<Association> new_associations;      // ue -> evo rebinds
  std::vector<std::string> removed_associations;  // ue ids losing their evo
  bool operator==(const ChangeDetail&) const = default;

  bool empty() const {
    return !link && !coverage && new_associations.empty() &&
           removed_associations.empty();
  }
};

struct ChangeEvent {
  Scenario scenario = Scenario::A;
  int label = 0;        // 4-class change code, 0..3
  std::string subject;  // link id (A) or UE id (B)
  ChangeDetail detail;
  bool operator==(const ChangeEvent&) const = default;
};

struct TopologySnapshot {
  std::uint64_t version = 0;
  std::vector<SubNetwork> subnetworks;
  std::vector<Link> links;
  std::vector<Ue> ues;
  std::vector<Evo> evos;
  std::vector<Association> associations;
  std::vector<ChangeEvent> event_log;
  bool operator==(const TopologySnapshot&) const = default;

  const SubNetwork* find_subnetwork(const std::string& id) const;
  const Link* find_link(const std::string& id) const;
  const Ue* find_ue(const std::string& id) const;
  const Evo* find_evo(const std::string& id) const;
  const Association* find_association(const std::string& ue_id) const;
  // Sub-network whose member list contains the UE, or nullptr.
  const SubNetwork* home_subnetwork(const std::string& ue_id) const;
};

// Declarative topology description, normally parsed from a topology file.
struct TopologySpec {
  int format_version = 1;
  std::vector<SubNetwork> subnetworks;
  std::vector<Link> links;
  std::vector<Ue> ues;
  std::vector<Evo> evos;
  std::vector<Association> associations;
};

// Validates the spec and produces the version-0 snapshot.
// Throws ValidationError on duplicate ids, dangling references, multiple
// parent flags, or a parent-dependent sub-network with no backhaul link.
TopologySnapshot build_topology(const TopologySpec& spec);

TopologySpec parse_topology_spec(const std::string& json_text);
TopologySpec load_topology_spec(const std::string& path);
std::string topology_to_json(const TopologySnapshot& snap, int indent = 2);

// Returns a copy with version+1, the event appended to the log, and only
// the fields named in event.detail changed.
// Throws DataError on unknown subject or scenario/subject mismatch.
TopologySnapshot apply_change(const TopologySnapshot& snap,
                              const ChangeEvent& event);

// Folds events over an initial snapshot; replay(initial, final.event_log)
// must reproduce the final snapshot exactly.
TopologySnapshot replay(const TopologySnapshot& initial,
                        const std::vector<ChangeEvent>& events);

struct ReassociationPolicy {
  Scenario scenario = Scenario::A;
  // Scenario B: EVO to fall back to when the UE is outside all coverage.
  std::optional<std::string> fallback_evo;
};

struct ReassocResult {
  enum class Status { Associated, Unreachable };
  Status status = Status::Unreachable;
  Association association;  // valid when status == Associated
};

// Pure query: picks the EVO the policy prefers for this UE against the
// given snapshot. Scenario A scores candidate paths lexicographically
// (loss asc, delay asc, bandwidth desc); Scenario B picks an EVO local to
// the sub-network covering the UE, master role first.
ReassocResult reassociate(const TopologySnapshot& snap, const std::string& ue,
                          const ReassociationPolicy& policy);

}  // namespace topomgr
