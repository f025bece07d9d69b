#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "conjointnet/conjoint/linear.hpp"
#include "conjointnet/conjoint/schema.hpp"
#include "conjointnet/numcore/serialize.hpp"
#include "conjointnet/training.hpp"

namespace conjointnet {

// Raw level strings -> ItemVector. Unknown values are a hard error.
inline ItemVector one_hot(const AttributeSchema& schema, const std::vector<std::string>& raw) {
  if (raw.size() != schema.attribute_count())
    throw ValidationError("raw record has " + std::to_string(raw.size()) + " values, schema has " +
                          std::to_string(schema.attribute_count()) + " attributes");
  std::vector<std::size_t> levels;
  levels.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& lv = schema.attribute(i).levels;
    const auto it = std::find(lv.begin(), lv.end(), raw[i]);
    if (it == lv.end())
      throw DataError("unseen level '" + raw[i] + "' for attribute '" + schema.attribute(i).name + "'");
    levels.push_back(static_cast<std::size_t>(it - lv.begin()));
  }
  return ItemVector::from_levels(schema, std::move(levels));
}

inline std::vector<std::string> decode(const AttributeSchema& schema, const ItemVector& x) {
  x.check(schema);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < schema.attribute_count(); ++i) out.push_back(schema.attribute(i).levels[x.level(i)]);
  return out;
}

// Attribute whose levels are the observed values, sorted numerically when all parse as numbers.
inline Attribute attribute_from_values(std::string name, const std::set<std::string>& values) {
  std::vector<std::string> levels(values.begin(), values.end());
  auto as_number = [](const std::string& s, double& v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
  };
  bool numeric = true;
  double tmp = 0.0;
  for (const auto& s : levels) numeric = numeric && as_number(s, tmp);
  if (numeric)
    std::stable_sort(levels.begin(), levels.end(), [&](const std::string& a, const std::string& b) {
      double x = 0.0, y = 0.0;
      as_number(a, x);
      as_number(b, y);
      return x < y;
    });
  // A constant column still needs two levels to form a valid attribute.
  if (levels.size() == 1) levels.push_back(levels.front() == "0" ? "1" : "0");
  if (levels.empty()) throw DataError("attribute '" + name + "' has no observed values");
  return {std::move(name), std::move(levels)};
}

// One labeled choice task: options[0] is A, y = 1 means A was chosen (or, for
// single-option datasets, the positive outcome).
struct ChoiceRecord {
  std::string id;
  std::string user;
  std::vector<ItemVector> options;
  int y = 0;
  std::vector<std::string> context;
};

struct Dataset {
  AttributeSchema schema;
  std::vector<ChoiceRecord> records;
  // Column names for ChoiceRecord::context (respondent attributes).
  std::vector<std::string> context_names;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return records.size(); }

  std::size_t option_count() const {
    if (records.empty()) throw DataError("dataset has no records");
    return records.front().options.size();
  }

  void validate() const {
    if (records.empty()) throw DataError("dataset has no records");
    const std::size_t k = records.front().options.size();
    if (k == 0) throw DataError("records have no options");
    for (std::size_t r = 0; r < records.size(); ++r) {
      const auto& rec = records[r];
      if (rec.options.size() != k) throw DataError("record " + std::to_string(r) + " has a different option count");
      if (rec.y != 0 && rec.y != 1) throw DataError("record " + std::to_string(r) + " target outside {0,1}");
      if (rec.context.size() != context_names.size())
        throw DataError("record " + std::to_string(r) + " context width disagrees with context_names");
      for (const auto& o : rec.options) {
        try {
          o.check(schema);
        } catch (const ValidationError& e) {
          throw DataError("record " + std::to_string(r) + ": " + e.what());
        }
      }
    }
  }

  std::vector<int> targets() const {
    std::vector<int> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.y);
    return y;
  }
};

inline std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

inline std::vector<std::string> option_prefixes(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t o = 0; o < k; ++o) out.push_back(k <= 26 ? std::string(1, char('A' + o)) + "." : "o" + std::to_string(o) + ".");
  return out;
}

// Schema of the concatenated single-vector input (all options side by side).
inline AttributeSchema single_vector_schema(const Dataset& ds) {
  return concat_schema(ds.schema, option_prefixes(ds.option_count()));
}

// Per-option one-hot matrices (Pairwise), or one concatenated matrix (SingleVector).
inline ChoiceBatch to_batch(const Dataset& ds, std::span<const std::size_t> indices, Pairing pairing) {
  const std::size_t k = ds.option_count();
  const std::size_t w = ds.schema.width();
  ChoiceBatch b;
  if (pairing == Pairing::Pairwise) {
    for (std::size_t o = 0; o < k; ++o) b.options.emplace_back(indices.size(), w);
  } else {
    b.options.emplace_back(indices.size(), k * w);
  }
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& rec = ds.records.at(indices[r]);
    for (std::size_t o = 0; o < k; ++o) {
      if (pairing == Pairing::Pairwise) {
        rec.options[o].write_one_hot(ds.schema, b.options[o].row(r));
      } else {
        rec.options[o].write_one_hot(ds.schema, b.options[0].row(r).subspan(o * w, w));
      }
    }
    b.targets.push_back(rec.y);
  }
  return b;
}

inline std::vector<ChoicePair> to_pairs(const Dataset& ds, std::span<const std::size_t> indices) {
  if (ds.option_count() != 2) throw ValidationError("pairwise view needs exactly two options per record");
  std::vector<ChoicePair> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& r = ds.records.at(i);
    out.push_back({r.options[0], r.options[1], r.y});
  }
  return out;
}

inline std::vector<LabeledItem> to_labeled(const Dataset& ds, std::span<const std::size_t> indices) {
  const AttributeSchema combined = single_vector_schema(ds);
  std::vector<LabeledItem> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& r = ds.records.at(i);
    out.push_back({concat_items(combined, r.options), r.y});
  }
  return out;
}

// Every option of the selected records as one-hot rows (unlabeled AE input).
inline Matrix item_matrix(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t k = ds.option_count();
  Matrix m(indices.size() * k, ds.schema.width());
  std::size_t row = 0;
  for (std::size_t i : indices)
    for (const auto& o : ds.records.at(i).options) o.write_one_hot(ds.schema, m.row(row++));
  return m;
}

// Level strings parsed as numbers, one column per attribute per option.
inline Matrix numeric_matrix(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t m = ds.schema.attribute_count();
  const std::size_t k = ds.option_count();
  std::vector<std::vector<double>> values(m);
  for (std::size_t a = 0; a < m; ++a)
    for (const auto& s : ds.schema.attribute(a).levels) {
      double v = 0.0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ValidationError("numeric encoding: level '" + s + "' of '" + ds.schema.attribute(a).name +
                              "' is not a number");
      values[a].push_back(v);
    }
  Matrix out(indices.size(), k * m);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& rec = ds.records.at(indices[r]);
    for (std::size_t o = 0; o < k; ++o)
      for (std::size_t a = 0; a < m; ++a) out(r, o * m + a) = values[a][rec.options[o].level(a)];
  }
  return out;
}

// Adds the respondent attributes to every option's item, with levels taken
// from the observed context values.
inline Dataset append_context(const Dataset& ds) {
  if (ds.context_names.empty()) return ds;
  std::vector<std::set<std::string>> seen(ds.context_names.size());
  for (const auto& r : ds.records)
    for (std::size_t c = 0; c < r.context.size(); ++c) seen.at(c).insert(r.context[c]);
  std::vector<Attribute> ctx;
  for (std::size_t c = 0; c < seen.size(); ++c) ctx.push_back(attribute_from_values("user." + ds.context_names[c], seen[c]));
  const AttributeSchema ctx_schema(ctx);
  Dataset out;
  out.schema = append_schema(ds.schema, ctx_schema);
  out.context_names = ds.context_names;
  out.meta = ds.meta;
  out.meta["context_appended"] = true;
  for (const auto& r : ds.records) {
    ChoiceRecord nr = r;
    const ItemVector c = one_hot(ctx_schema, r.context);
    for (auto& o : nr.options) {
      std::vector<std::size_t> lv = o.levels();
      lv.insert(lv.end(), c.levels().begin(), c.levels().end());
      o = ItemVector::from_levels(out.schema, std::move(lv));
    }
    out.records.push_back(std::move(nr));
  }
  return out;
}

inline nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : ds.records) {
    nlohmann::json opts = nlohmann::json::array();
    for (const auto& o : r.options) opts.push_back(o.levels());
    nlohmann::json jr{{"id", r.id}, {"user", r.user}, {"options", opts}, {"y", r.y}};
    if (!r.context.empty()) jr["context"] = r.context;
    records.push_back(std::move(jr));
  }
  return {{"format", "conjointnet-dataset"}, {"version", 1},         {"schema", schema_to_json(ds.schema)},
          {"context_names", ds.context_names}, {"records", records}, {"meta", ds.meta}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "conjointnet-dataset") throw DataError("not a conjointnet dataset file");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported dataset version");
    Dataset ds;
    ds.schema = schema_from_json(j.at("schema"));
    ds.context_names = j.value("context_names", std::vector<std::string>{});
    ds.meta = j.value("meta", nlohmann::json::object());
    for (const auto& jr : j.at("records")) {
      ChoiceRecord r;
      r.id = jr.value("id", "");
      r.user = jr.value("user", "");
      r.y = jr.at("y").get<int>();
      r.context = jr.value("context", std::vector<std::string>{});
      for (const auto& o : jr.at("options")) {
        try {
          r.options.push_back(ItemVector::from_levels(ds.schema, o.get<std::vector<std::size_t>>()));
        } catch (const ValidationError& e) {
          throw DataError("record '" + r.id + "': " + e.what());
        }
      }
      ds.records.push_back(std::move(r));
    }
    ds.validate();
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed dataset file: ") + e.what());
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << dataset_to_json(ds).dump() << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("dataset '" + path + "' is not valid JSON: " + e.what());
  }
  return dataset_from_json(j);
}

}  // namespace conjointnet
