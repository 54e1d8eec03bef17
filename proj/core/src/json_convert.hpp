#pragma once

// Internal JSON conversions shared between the topology file code and the
// service. Not installed; public headers stay JSON-free.

#include <nlohmann/json.hpp>

#include "topomgr/topology.hpp"

namespace topomgr::detail {

nlohmann::json event_to_json(const ChangeEvent& e);
ChangeEvent event_from_json(const nlohmann::json& j);
nlohmann::json snapshot_to_json(const TopologySnapshot& snap);

}  // namespace topomgr::detail
