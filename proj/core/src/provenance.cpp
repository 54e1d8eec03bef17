#include "topomgr/provenance.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topomgr/topology.hpp"

namespace topomgr {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for digest: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::string& path) {
  inputs.push_back({path, file_digest(path)});
}

void RunManifest::add_output(const std::string& path) {
  outputs.push_back({path, file_digest(path)});
}

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["config_digest"] = config_digest;
  j["seed"] = seed;
  auto entries = [](const std::vector<ManifestEntry>& v) {
    json arr = json::array();
    for (const auto& e : v) arr.push_back(json{{"path", e.path}, {"digest", e.digest}});
    return arr;
  };
  j["inputs"] = entries(inputs);
  j["outputs"] = entries(outputs);
  j["timings"] = {{"total_seconds", total_seconds}};
  j["created_at"] = created_at;
  return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << to_json() << "\n";
}

}  // namespace topomgr
