#include "topomgr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topomgr/rng.hpp"

namespace topomgr {
namespace data {

using nlohmann::json;

bool is_valid_label(int label) { return label >= 0 && label < kNumLabels; }

void Dataset::append_row(std::int64_t step, std::span<const double> feats,
                         int label) {
  if (feats.size() != n_features())
    throw DataError("row width does not match feature schema");
  if (!is_valid_label(label)) throw DataError("unknown label value");
  steps.push_back(step);
  features.insert(features.end(), feats.begin(), feats.end());
  labels.push_back(label);
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.scenario = ds.scenario;
  out.feature_names = ds.feature_names;
  out.provenance = ds.provenance;
  for (std::size_t i : idx) out.append_row(ds.steps[i], ds.row(i), ds.labels[i]);
  return out;
}

}  // namespace

Split split(const Dataset& ds, double test_fraction, SplitMode mode,
            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DataError("test_fraction must be in (0,1)");
  const std::size_t n = ds.n_rows();
  if (n < 2) throw DataError("dataset too small to split");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (mode == SplitMode::Shuffled) {
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
      std::size_t j = rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }
  }

  const auto n_test = static_cast<std::size_t>(
      std::ceil(test_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_test;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
  return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

WindowedDataset window(const Dataset& ds, int w, int h) {
  if (w < 1 || h < 0) throw DataError("window requires W >= 1 and H >= 0");
  const std::size_t n = ds.n_rows();
  if (n <= static_cast<std::size_t>(w) + static_cast<std::size_t>(h))
    throw DataError("not enough rows to window");

  WindowedDataset out;
  out.window = w;
  out.horizon = h;
  out.data.scenario = ds.scenario;
  out.data.provenance = ds.provenance;
  for (int k = 0; k < w; ++k) {
    const int lag = w - 1 - k;
    for (const auto& name : ds.feature_names)
      out.data.feature_names.push_back(name + "_lag" + std::to_string(lag));
  }
  const std::size_t n_out = n - static_cast<std::size_t>(w) - h + 1;
  std::vector<double> buf;
  for (std::size_t i = 0; i < n_out; ++i) {
    buf.clear();
    for (int k = 0; k < w; ++k) {
      auto r = ds.row(i + k);
      buf.insert(buf.end(), r.begin(), r.end());
    }
    const std::size_t target = i + w - 1 + h;
    out.data.append_row(ds.steps[target], buf, ds.labels[target]);
  }
  return out;
}

namespace {

void format_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw DataError("non-numeric cell '" + cell + "' at line " +
                    std::to_string(line_no));
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  std::string buf = "step";
  for (const auto& name : ds.feature_names) {
    buf += ',';
    buf += name;
  }
  buf += ",label\n";
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    buf += std::to_string(ds.steps[i]);
    for (double v : ds.row(i)) {
      buf += ',';
      format_double(buf, v);
    }
    buf += ',';
    buf += std::to_string(ds.labels[i]);
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path);
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);

  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: " + path);
  auto header = split_line(line);
  if (header.size() < 3 || header.front() != "step" || header.back() != "label")
    throw DataError("schema mismatch: expected step,<features...>,label header");
  ds.feature_names.assign(header.begin() + 1, header.end() - 1);

  bool has_a = false, has_b = false;
  for (const auto& name : ds.feature_names) {
    if (name.find("throughput_mbps") != std::string::npos) has_a = true;
    if (name.find("rssi_dbm") != std::string::npos) has_b = true;
  }
  if (has_a == has_b)
    throw DataError("cannot infer scenario from CSV header: " + path);
  ds.scenario = has_a ? Scenario::A : Scenario::B;

  std::vector<double> feats(ds.n_features());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != ds.n_features() + 2)
      throw DataError("schema mismatch at line " + std::to_string(line_no));
    const auto step =
        static_cast<std::int64_t>(parse_double(cells.front(), line_no));
    for (std::size_t k = 0; k < ds.n_features(); ++k)
      feats[k] = parse_double(cells[k + 1], line_no);
    const int label = static_cast<int>(parse_double(cells.back(), line_no));
    if (!is_valid_label(label))
      throw DataError("unknown label value at line " + std::to_string(line_no));
    ds.append_row(step, feats, label);
  }

  std::ifstream side(path + ".provenance.json");
  if (side) {
    try {
      json j = json::parse(side);
      ds.provenance.config_digest = j.value("config_digest", std::string());
      ds.provenance.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception&) {
      throw DataError("corrupt provenance sidecar for " + path);
    }
  }
  return ds;
}

void write_provenance_sidecar(const Dataset& ds, const std::string& csv_path) {
  json j{{"config_digest", ds.provenance.config_digest},
         {"seed", ds.provenance.seed}};
  std::ofstream out(csv_path + ".provenance.json", std::ios::binary);
  if (!out) throw DataError("cannot write provenance sidecar for " + csv_path);
  out << j.dump(2) << "\n";
}

std::vector<std::string> scenario_feature_names(Scenario s) {
  if (s == Scenario::A) return {"x_m", "y_m", "throughput_mbps", "rtt_ms"};
  return {"x_m", "y_m", "rssi_dbm", "velocity_mps"};
}

std::string base_feature_name(const std::string& windowed_name) {
  auto pos = windowed_name.rfind("_lag");
  if (pos == std::string::npos) return windowed_name;
  for (std::size_t i = pos + 4; i < windowed_name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(windowed_name[i])))
      return windowed_name;
  if (pos + 4 == windowed_name.size()) return windowed_name;
  return windowed_name.substr(0, pos);
}

int window_of(const std::vector<std::string>& feature_names) {
  int max_lag = 0;
  bool any = false;
  for (const auto& name : feature_names) {
    auto pos = name.rfind("_lag");
    if (pos == std::string::npos || pos + 4 >= name.size()) continue;
    bool digits = true;
    for (std::size_t i = pos + 4; i < name.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
    if (!digits) continue;
    any = true;
    max_lag = std::max(max_lag, std::stoi(name.substr(pos + 4)));
  }
  return any ? max_lag + 1 : 1;
}

}  // namespace data
}  // namespace topomgr
