#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <vector>

#include "conjointnet/conjoint/schema.hpp"

namespace conjointnet {

enum class Coding { Raw, EffectsCoded };

// Partworth w_ij for every (attribute i, level j) of a schema.
class PartworthTable {
 public:
  PartworthTable() = default;

  explicit PartworthTable(AttributeSchema schema, Coding coding = Coding::Raw)
      : schema_(std::move(schema)), coding_(coding) {
    for (std::size_t i = 0; i < schema_.attribute_count(); ++i) w_.emplace_back(schema_.level_count(i), 0.0);
  }

  PartworthTable(AttributeSchema schema, std::vector<std::vector<double>> w, Coding coding = Coding::Raw)
      : schema_(std::move(schema)), w_(std::move(w)), coding_(coding) {
    if (w_.size() != schema_.attribute_count()) throw ShapeError("partworth table attribute count mismatch");
    for (std::size_t i = 0; i < w_.size(); ++i)
      if (w_[i].size() != schema_.level_count(i))
        throw ShapeError("partworth table level count mismatch for '" + schema_.attribute(i).name + "'");
  }

  // Builds a table from a flat vector laid out like the schema's one-hot encoding.
  static PartworthTable from_flat(AttributeSchema schema, std::span<const double> flat, Coding coding = Coding::Raw) {
    if (flat.size() != schema.width()) throw ShapeError("flat partworth vector has wrong width");
    PartworthTable t(std::move(schema), coding);
    for (std::size_t i = 0; i < t.schema_.attribute_count(); ++i)
      for (std::size_t j = 0; j < t.w_[i].size(); ++j) t.w_[i][j] = flat[t.schema_.offset(i) + j];
    return t;
  }

  const AttributeSchema& schema() const { return schema_; }
  Coding coding() const { return coding_; }
  double operator()(std::size_t attribute, std::size_t level) const { return w_.at(attribute).at(level); }
  double& at(std::size_t attribute, std::size_t level) { return w_.at(attribute).at(level); }
  const std::vector<double>& levels(std::size_t attribute) const { return w_.at(attribute); }
  const std::vector<std::vector<double>>& weights() const { return w_; }

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& row : w_) out.insert(out.end(), row.begin(), row.end());
    return out;
  }

 private:
  AttributeSchema schema_;
  std::vector<std::vector<double>> w_;
  Coding coding_ = Coding::Raw;
};

// U(x) = sum_i sum_j w_ij x_ij
inline double utility(const PartworthTable& w, const ItemVector& x) {
  x.check(w.schema());
  double u = 0.0;
  for (std::size_t i = 0; i < x.attribute_count(); ++i) u += w(i, x.level(i));
  return u;
}

// Per-attribute mean removal; utility differences between items are unchanged.
inline PartworthTable effects_code(const PartworthTable& w) {
  auto weights = w.weights();
  for (auto& row : weights) {
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    for (double& v : row) v -= mean;
  }
  return PartworthTable(w.schema(), std::move(weights), Coding::EffectsCoded);
}

// Sum of per-attribute level means, i.e. the constant effects_code removes from every utility.
inline double effects_offset(const PartworthTable& w) {
  double offset = 0.0;
  for (const auto& row : w.weights())
    offset += std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
  return offset;
}

enum class ImportanceMethod { Range, LevelSum };

struct AttributeImportance {
  std::vector<double> importance;
  std::vector<double> share;
  // All importances zero: shares are reported uniform.
  bool degenerate = false;
};

// Range: u_i = max_j w_ij - min_j w_ij. LevelSum: u_i = sum_j w_ij, with shares
// taken over |u_i| so they stay in [0, 1].
inline AttributeImportance attribute_importance(const PartworthTable& w,
                                                ImportanceMethod method = ImportanceMethod::Range) {
  AttributeImportance out;
  for (const auto& row : w.weights()) {
    if (method == ImportanceMethod::Range) {
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      out.importance.push_back(*hi - *lo);
    } else {
      out.importance.push_back(std::accumulate(row.begin(), row.end(), 0.0));
    }
  }
  double total = 0.0;
  for (double u : out.importance) total += std::abs(u);
  const std::size_t m = out.importance.size();
  if (total == 0.0) {
    out.degenerate = true;
    out.share.assign(m, m == 0 ? 0.0 : 1.0 / static_cast<double>(m));
  } else {
    for (double u : out.importance) out.share.push_back(std::abs(u) / total);
  }
  return out;
}

// Highest-partworth level per attribute; ties go to the lowest level index.
inline ItemVector best_option(const PartworthTable& w) {
  std::vector<std::size_t> levels;
  for (const auto& row : w.weights()) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    levels.push_back(best);
  }
  return ItemVector::from_levels(w.schema(), std::move(levels));
}

inline ItemVector best_option(const PartworthTable& w, const AttributeSchema& schema) {
  if (!(w.schema() == schema)) throw ValidationError("best_option: schema mismatch");
  return best_option(w);
}

// CSV columns: attribute, level, partworth, importance, importance_share
inline void write_partworth_csv(std::ostream& os, const PartworthTable& w,
                                ImportanceMethod method = ImportanceMethod::Range) {
  const auto imp = attribute_importance(w, method);
  os << "attribute,level,partworth,importance,importance_share\n";
  os << std::setprecision(17);
  const auto& schema = w.schema();
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (std::size_t i = 0; i < schema.attribute_count(); ++i)
    for (std::size_t j = 0; j < schema.level_count(i); ++j)
      os << quote(schema.attribute(i).name) << ',' << quote(schema.attribute(i).levels[j]) << ',' << w(i, j) << ','
         << imp.importance[i] << ',' << imp.share[i] << '\n';
}

inline void write_partworth_csv(const std::string& path, const PartworthTable& w,
                                ImportanceMethod method = ImportanceMethod::Range) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  write_partworth_csv(os, w, method);
}

inline nlohmann::json partworths_to_json(const PartworthTable& w) {
  return nlohmann::json{{"schema", schema_to_json(w.schema())},
                        {"coding", w.coding() == Coding::EffectsCoded ? "effects" : "raw"},
                        {"weights", w.weights()}};
}

inline PartworthTable partworths_from_json(const nlohmann::json& j) {
  try {
    return PartworthTable(schema_from_json(j.at("schema")), j.at("weights").get<std::vector<std::vector<double>>>(),
                          j.value("coding", "raw") == "effects" ? Coding::EffectsCoded : Coding::Raw);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed partworth table: ") + e.what());
  }
}

}  // namespace conjointnet
