#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conjointnet/dataio/csv.hpp"
#include "conjointnet/dataio/dataset.hpp"
#include "conjointnet/dataio/hash.hpp"

namespace conjointnet {

// One non-control comparison. car_a / car_b are raw attribute values in the
// experiment's item-column order; chosen = 1 when car_a was preferred.
struct CarChoiceRecord {
  std::string user_id;
  std::vector<std::string> user_attrs;
  std::string item_a;
  std::string item_b;
  std::vector<std::string> car_a;
  std::vector<std::string> car_b;
  int chosen = 0;
  int experiment = 1;
};

struct CarLoadStats {
  std::size_t rows_read = 0;
  std::size_t control_rows = 0;
  std::size_t rows_rejected = 0;
  std::vector<std::size_t> rejected_lines;
  std::size_t records = 0;
  std::size_t chosen_a = 0;
};

inline nlohmann::json car_stats_to_json(const CarLoadStats& s) {
  return {{"rows_read", s.rows_read},         {"control_rows", s.control_rows}, {"rows_rejected", s.rows_rejected},
          {"rejected_lines", s.rejected_lines}, {"records", s.records},         {"chosen_a", s.chosen_a}};
}

struct CarExperiment {
  int experiment = 1;
  std::vector<std::string> user_columns;  // without the id column
  std::vector<std::string> item_columns;  // without the id column
  AttributeSchema schema;                 // item attributes, levels from the items file
  std::vector<CarChoiceRecord> records;
  CarLoadStats stats;
};

struct CarFiles {
  std::string users;
  std::string items;
  std::string prefs;
};

// `path` is either a directory holding usersN.csv / itemsN.csv / prefsN.csv
// (or users.csv / items.csv / prefs.csv), or the prefs file itself with the
// other two as siblings named by replacing "prefs" in the file name.
inline CarFiles resolve_car_files(const std::string& path, int experiment) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (fs::is_directory(p)) {
    const std::string n = std::to_string(experiment);
    for (const std::string& suffix : {n, std::string()}) {
      CarFiles f{(p / ("users" + suffix + ".csv")).string(), (p / ("items" + suffix + ".csv")).string(),
                 (p / ("prefs" + suffix + ".csv")).string()};
      if (fs::exists(f.users) && fs::exists(f.items) && fs::exists(f.prefs)) return f;
    }
    throw DataError("no users/items/prefs files for experiment " + n + " in '" + path + "'");
  }
  const std::string name = p.filename().string();
  const auto pos = name.find("prefs");
  if (pos == std::string::npos) throw DataError("car preference path must be a directory or a prefs file: '" + path + "'");
  auto sibling = [&](const std::string& what) {
    std::string n2 = name;
    n2.replace(pos, 5, what);
    return (p.parent_path() / n2).string();
  };
  CarFiles f{sibling("users"), sibling("items"), path};
  for (const auto& file : {f.users, f.items, f.prefs})
    if (!fs::exists(file)) throw DataError("missing car preference file '" + file + "'");
  return f;
}

namespace detail {

struct KeyedTable {
  std::vector<std::string> columns;
  std::map<std::string, std::vector<std::string>> rows;
};

// First column is the id; rows with the wrong width or a repeated id are rejected.
inline KeyedTable read_keyed(std::istream& in, const std::string& what) {
  csv::Reader reader(in);
  KeyedTable t;
  if (reader.header().size() < 2) throw DataError(what + " file needs an id column and at least one attribute");
  t.columns.assign(reader.header().begin() + 1, reader.header().end());
  std::vector<std::string> f;
  std::size_t line = 0;
  while (reader.next(f, line)) {
    if (f.size() != reader.header().size() || f[0].empty())
      throw DataError(what + " file: malformed row at line " + std::to_string(line));
    if (!t.rows.emplace(f[0], std::vector<std::string>(f.begin() + 1, f.end())).second)
      throw DataError(what + " file: duplicate id '" + f[0] + "' at line " + std::to_string(line));
  }
  return t;
}

inline bool is_flag(const std::string& s, bool& value) {
  if (s == "1" || s == "1.0" || s == "true" || s == "TRUE" || s == "True") return value = true, true;
  if (s == "0" || s == "0.0" || s == "false" || s == "FALSE" || s == "False") return value = false, true;
  return false;
}

}  // namespace detail

inline CarExperiment load_car_experiment(std::istream& users_in, std::istream& items_in, std::istream& prefs_in,
                                         int experiment) {
  const auto users = detail::read_keyed(users_in, "users");
  const auto items = detail::read_keyed(items_in, "items");
  CarExperiment ex;
  ex.experiment = experiment;
  ex.user_columns = users.columns;
  ex.item_columns = items.columns;

  std::vector<Attribute> attrs;
  for (std::size_t c = 0; c < items.columns.size(); ++c) {
    std::set<std::string> seen;
    for (const auto& [id, row] : items.rows) seen.insert(row[c]);
    attrs.push_back(attribute_from_values(items.columns[c], seen));
  }
  ex.schema = AttributeSchema(std::move(attrs));

  csv::Reader reader(prefs_in);
  if (reader.header().size() < 3) throw DataError("prefs file needs user, item1 and item2 columns");
  const bool has_control = reader.header().size() >= 4;
  auto& st = ex.stats;
  auto reject = [&](std::size_t line) {
    ++st.rows_rejected;
    st.rejected_lines.push_back(line);
  };
  std::vector<std::string> f;
  std::size_t line = 0;
  while (reader.next(f, line)) {
    ++st.rows_read;
    if (f.size() != reader.header().size()) {
      reject(line);
      continue;
    }
    bool control = false;
    if (has_control && !detail::is_flag(f[3], control)) {
      reject(line);
      continue;
    }
    const auto u = users.rows.find(f[0]);
    const auto a = items.rows.find(f[1]);
    const auto b = items.rows.find(f[2]);
    if (u == users.rows.end() || a == items.rows.end() || b == items.rows.end() || f[1] == f[2]) {
      reject(line);
      continue;
    }
    if (control) {
      ++st.control_rows;
      continue;
    }
    // The file lists the preferred car first; a content hash decides which
    // side it is shown on so both target values occur.
    const bool swap = (fnv1a(f[0] + '\x1f' + f[1] + '\x1f' + f[2]) & 1U) != 0;
    CarChoiceRecord r;
    r.user_id = f[0];
    r.user_attrs = u->second;
    r.item_a = swap ? f[2] : f[1];
    r.item_b = swap ? f[1] : f[2];
    r.car_a = swap ? b->second : a->second;
    r.car_b = swap ? a->second : b->second;
    r.chosen = swap ? 0 : 1;
    r.experiment = experiment;
    st.chosen_a += static_cast<std::size_t>(r.chosen);
    ex.records.push_back(std::move(r));
  }
  st.records = ex.records.size();
  return ex;
}

inline CarExperiment load_car_experiment(const std::string& path, int experiment) {
  const CarFiles files = resolve_car_files(path, experiment);
  auto u = csv::open(files.users);
  auto i = csv::open(files.items);
  auto p = csv::open(files.prefs);
  return load_car_experiment(u, i, p, experiment);
}

struct CarData {
  CarExperiment experiment1;
  std::optional<CarExperiment> experiment2;
};

inline CarData load_car(const std::string& path_experiment1, const std::string& path_experiment2 = "") {
  CarData d{load_car_experiment(path_experiment1, 1), std::nullopt};
  if (!path_experiment2.empty()) d.experiment2 = load_car_experiment(path_experiment2, 2);
  return d;
}

// Pairwise records over the experiment's item schema; user attributes ride
// along as context (see append_context).
inline Dataset car_dataset(const CarExperiment& ex) {
  Dataset ds;
  ds.schema = ex.schema;
  ds.context_names = ex.user_columns;
  for (std::size_t i = 0; i < ex.records.size(); ++i) {
    const auto& r = ex.records[i];
    ds.records.push_back({r.user_id + ":" + r.item_a + ":" + r.item_b, r.user_id,
                          {one_hot(ex.schema, r.car_a), one_hot(ex.schema, r.car_b)}, r.chosen, r.user_attrs});
  }
  ds.meta = {{"source", "car_preference"},
             {"experiment", ex.experiment},
             {"option_labels", {"A", "B"}},
             {"preferred_pairing", "pairwise"},
             {"load_stats", car_stats_to_json(ex.stats)}};
  return ds;
}

}  // namespace conjointnet
