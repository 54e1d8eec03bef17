#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace topomgr {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a, 64-bit. Deterministic content fingerprint for configs and
// output files; not a cryptographic hash.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a_hex(std::string_view bytes);
std::string file_digest(const std::string& path);

std::string iso8601_utc_now();

struct ManifestEntry {
  std::string path;
  std::string digest;
};

// Record of one CLI run: same inputs + seed reproduce the same output
// digests (timings excluded).
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> inputs;
  std::vector<ManifestEntry> outputs;
  double total_seconds = 0.0;
  std::string created_at;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace topomgr
