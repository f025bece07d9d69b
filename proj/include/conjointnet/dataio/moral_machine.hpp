#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "conjointnet/dataio/csv.hpp"
#include "conjointnet/dataio/dataset.hpp"
#include "conjointnet/dataio/hash.hpp"

namespace conjointnet {

inline const std::array<std::string, 20>& mm_agent_columns() {
  static const std::array<std::string, 20> cols{
      "Man",         "Woman",         "Pregnant",        "Stroller",      "OldMan",
      "OldWoman",    "Boy",           "Girl",            "Homeless",      "LargeWoman",
      "LargeMan",    "Criminal",      "MaleExecutive",   "FemaleExecutive", "FemaleAthlete",
      "MaleAthlete", "FemaleDoctor",  "MaleDoctor",      "Dog",           "Cat"};
  return cols;
}

inline std::vector<std::string> mm_required_columns() {
  std::vector<std::string> cols{"ResponseID", "UserID", "PedPed", "Intervention", "Saved", "CrossingSignal", "LeftHand"};
  cols.insert(cols.end(), mm_agent_columns().begin(), mm_agent_columns().end());
  return cols;
}

constexpr std::size_t kMMSideFeatures = 22;  // 20 agents, CrossingSignal, LeftHand

// One dilemma after merging its intervention / no-intervention rows.
struct MMScenarioPair {
  std::string response_id;
  std::string user_id;
  std::array<int, kMMSideFeatures> features_int{};
  std::array<int, kMMSideFeatures> features_noint{};
  int intervened = 0;
};

struct MMLoadOptions {
  std::optional<std::size_t> limit;
  char delimiter = ',';
};

struct MMLoadStats {
  std::size_t rows_read = 0;
  std::size_t rows_not_pedped = 0;
  std::size_t rows_empty_user = 0;
  std::size_t rows_malformed = 0;
  std::vector<std::size_t> malformed_lines;  // first 100
  std::size_t responses_unpaired = 0;
  std::size_t pairs_before_limit = 0;
  std::size_t pairs = 0;
};

inline nlohmann::json mm_stats_to_json(const MMLoadStats& s) {
  return {{"rows_read", s.rows_read},
          {"rows_not_pedped", s.rows_not_pedped},
          {"rows_empty_user", s.rows_empty_user},
          {"rows_malformed", s.rows_malformed},
          {"malformed_lines", s.malformed_lines},
          {"responses_unpaired", s.responses_unpaired},
          {"pairs_before_limit", s.pairs_before_limit},
          {"pairs", s.pairs}};
}

struct MMData {
  std::vector<MMScenarioPair> pairs;
  AttributeSchema schema;  // per-side item: 20 agents + CrossingSignal + LeftHand
  MMLoadStats stats;
};

namespace detail {

inline std::optional<int> parse_small_int(const std::string& s) {
  int v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc()) return std::nullopt;
  // Tolerate "1.0" style exports.
  if (r.ptr != last) {
    if (*r.ptr != '.') return std::nullopt;
    for (const char* p = r.ptr + 1; p != last; ++p)
      if (*p != '0') return std::nullopt;
  }
  return v;
}

struct MMRow {
  std::array<int, kMMSideFeatures> features{};
  int saved = 0;
};

}  // namespace detail

// The 42-wide numeric scenario: int-side agents, no-int-side agents,
// CrossingSignal and LeftHand (taken from the intervention row).
inline std::array<double, 42> mm_numeric42(const MMScenarioPair& p) {
  std::array<double, 42> out{};
  for (std::size_t i = 0; i < 20; ++i) {
    out[i] = p.features_int[i];
    out[20 + i] = p.features_noint[i];
  }
  out[40] = p.features_int[20];
  out[41] = p.features_int[21];
  return out;
}

inline MMData load_mm(std::istream& in, const MMLoadOptions& opt = {}) {
  csv::Reader reader(in, opt.delimiter);
  const auto missing = reader.missing(mm_required_columns());
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw DataError("moral machine input is missing columns: " + names);
  }
  auto col = [&](const std::string& c) { return *reader.find(c); };
  const std::size_t c_resp = col("ResponseID"), c_user = col("UserID"), c_ped = col("PedPed"),
                    c_int = col("Intervention"), c_saved = col("Saved"), c_cross = col("CrossingSignal"),
                    c_left = col("LeftHand");
  std::array<std::size_t, 20> c_agents{};
  for (std::size_t i = 0; i < 20; ++i) c_agents[i] = col(mm_agent_columns()[i]);
  const std::size_t width = reader.header().size();

  struct Group {
    std::string response_id;
    std::string user_id;
    std::vector<std::pair<int, detail::MMRow>> rows;  // (Intervention, row)
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> group_index;

  MMData data;
  auto& st = data.stats;
  auto malformed = [&](std::size_t line) {
    ++st.rows_malformed;
    if (st.malformed_lines.size() < 100) st.malformed_lines.push_back(line);
  };

  std::vector<std::string> f;
  std::size_t line = 0;
  while (reader.next(f, line)) {
    ++st.rows_read;
    if (f.size() != width) {
      malformed(line);
      continue;
    }
    const auto ped = detail::parse_small_int(f[c_ped]);
    if (!ped) {
      malformed(line);
      continue;
    }
    if (*ped != 1) {
      ++st.rows_not_pedped;
      continue;
    }
    if (f[c_user].empty() || f[c_user] == "NA") {
      ++st.rows_empty_user;
      continue;
    }
    detail::MMRow row;
    bool ok = true;
    auto read = [&](std::size_t c, int lo, int hi) {
      const auto v = detail::parse_small_int(f[c]);
      if (!v || *v < lo || *v > hi) {
        ok = false;
        return 0;
      }
      return *v;
    };
    for (std::size_t i = 0; i < 20; ++i) row.features[i] = read(c_agents[i], 0, 5);
    row.features[20] = read(c_cross, 0, 2);
    row.features[21] = read(c_left, 0, 1);
    row.saved = read(c_saved, 0, 1);
    const int intervention = read(c_int, 0, 1);
    if (!ok || f[c_resp].empty()) {
      malformed(line);
      continue;
    }
    auto [it, inserted] = group_index.emplace(f[c_resp], groups.size());
    if (inserted) groups.push_back({f[c_resp], f[c_user], {}});
    groups[it->second].rows.emplace_back(intervention, row);
  }

  for (const auto& g : groups) {
    const auto& rows = g.rows;
    if (rows.size() != 2 || rows[0].first == rows[1].first) {
      ++st.responses_unpaired;
      continue;
    }
    const auto& r_int = rows[0].first == 1 ? rows[0].second : rows[1].second;
    const auto& r_noint = rows[0].first == 1 ? rows[1].second : rows[0].second;
    data.pairs.push_back({g.response_id, g.user_id, r_int.features, r_noint.features, r_int.saved});
  }
  st.pairs_before_limit = data.pairs.size();

  if (opt.limit && *opt.limit < data.pairs.size()) {
    // Keep the `limit` smallest ResponseID hashes, in original order.
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(data.pairs.size());
    for (std::size_t i = 0; i < data.pairs.size(); ++i) keyed.emplace_back(fnv1a(data.pairs[i].response_id), i);
    std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(*opt.limit), keyed.end());
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < *opt.limit; ++i) keep.push_back(keyed[i].second);
    std::sort(keep.begin(), keep.end());
    std::vector<MMScenarioPair> kept;
    kept.reserve(keep.size());
    for (std::size_t i : keep) kept.push_back(std::move(data.pairs[i]));
    data.pairs = std::move(kept);
  }
  st.pairs = data.pairs.size();

  // Levels 0..max observed value (at least two levels per attribute).
  std::array<int, kMMSideFeatures> max_seen{};
  for (const auto& p : data.pairs)
    for (std::size_t i = 0; i < kMMSideFeatures; ++i)
      max_seen[i] = std::max({max_seen[i], p.features_int[i], p.features_noint[i]});
  std::vector<Attribute> attrs;
  for (std::size_t i = 0; i < kMMSideFeatures; ++i) {
    const std::string name = i < 20 ? mm_agent_columns()[i] : (i == 20 ? "CrossingSignal" : "LeftHand");
    Attribute a{name, {}};
    for (int v = 0; v <= std::max(max_seen[i], 1); ++v) a.levels.push_back(std::to_string(v));
    attrs.push_back(std::move(a));
  }
  data.schema = AttributeSchema(std::move(attrs));
  return data;
}

inline MMData load_mm(const std::string& path, const MMLoadOptions& opt = {}) {
  auto in = csv::open(path);
  return load_mm(in, opt);
}

// Records with options {intervention side, no-intervention side} and y = Intervened.
inline Dataset mm_dataset(const MMData& data) {
  Dataset ds;
  ds.schema = data.schema;
  ds.records.reserve(data.pairs.size());
  auto item = [&](const std::array<int, kMMSideFeatures>& f) {
    std::vector<std::size_t> lv(f.begin(), f.end());
    return ItemVector::from_levels(ds.schema, std::move(lv));
  };
  for (const auto& p : data.pairs)
    ds.records.push_back({p.response_id, p.user_id, {item(p.features_int), item(p.features_noint)}, p.intervened, {}});
  ds.meta = {{"source", "moral_machine"},
             {"option_labels", {"int", "noint"}},
             {"preferred_pairing", "single"},
             {"one_hot_width_per_side", ds.schema.width()},
             {"one_hot_width_concatenated", 2 * ds.schema.width()},
             {"load_stats", mm_stats_to_json(data.stats)}};
  return ds;
}

}  // namespace conjointnet
