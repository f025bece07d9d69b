#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "conjointnet/errors.hpp"
#include "conjointnet/numcore/matrix.hpp"

namespace conjointnet {

struct Attribute {
  std::string name;
  std::vector<std::string> levels;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

// Layout of a survey item: m attributes, attribute i having k_i >= 2 levels.
class AttributeSchema {
 public:
  AttributeSchema() = default;

  explicit AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    std::unordered_set<std::string> names;
    offsets_.reserve(attributes_.size());
    for (const auto& a : attributes_) {
      if (a.levels.size() < 2)
        throw ValidationError("attribute '" + a.name + "' needs at least 2 levels, has " +
                              std::to_string(a.levels.size()));
      if (!names.insert(a.name).second) throw ValidationError("duplicate attribute name '" + a.name + "'");
      std::unordered_set<std::string> level_names(a.levels.begin(), a.levels.end());
      if (level_names.size() != a.levels.size())
        throw ValidationError("attribute '" + a.name + "' has duplicate level names");
      offsets_.push_back(width_);
      width_ += a.levels.size();
    }
  }

  std::size_t attribute_count() const { return attributes_.size(); }
  std::size_t level_count(std::size_t i) const { return attributes_.at(i).levels.size(); }
  std::size_t width() const { return width_; }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
  const std::vector<Attribute>& attributes() const { return attributes_; }

  std::vector<std::size_t> level_counts() const {
    std::vector<std::size_t> out;
    for (const auto& a : attributes_) out.push_back(a.levels.size());
    return out;
  }

  std::size_t find_attribute(const std::string& name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
      if (attributes_[i].name == name) return i;
    throw ValidationError("no attribute named '" + name + "'");
  }

  std::size_t find_level(std::size_t attribute, const std::string& value) const {
    const auto& a = attributes_.at(attribute);
    for (std::size_t j = 0; j < a.levels.size(); ++j)
      if (a.levels[j] == value) return j;
    throw DataError("attribute '" + a.name + "' has no level '" + value + "'");
  }

  // Number of distinct items; saturates at SIZE_MAX.
  std::size_t item_count() const {
    std::size_t n = 1;
    for (const auto& a : attributes_) {
      if (n > std::numeric_limits<std::size_t>::max() / a.levels.size())
        return std::numeric_limits<std::size_t>::max();
      n *= a.levels.size();
    }
    return n;
  }

  friend bool operator==(const AttributeSchema& a, const AttributeSchema& b) {
    return a.attributes_ == b.attributes_;
  }

 private:
  std::vector<Attribute> attributes_;
  std::vector<std::size_t> offsets_;
  std::size_t width_ = 0;
};

// Each attribute of `schema` repeated once per prefix, e.g. "A.", "B.".
inline AttributeSchema concat_schema(const AttributeSchema& schema, const std::vector<std::string>& prefixes) {
  std::vector<Attribute> attrs;
  for (const auto& prefix : prefixes)
    for (const auto& a : schema.attributes()) attrs.push_back({prefix + a.name, a.levels});
  return AttributeSchema(std::move(attrs));
}

inline AttributeSchema append_schema(const AttributeSchema& a, const AttributeSchema& b) {
  std::vector<Attribute> attrs = a.attributes();
  attrs.insert(attrs.end(), b.attributes().begin(), b.attributes().end());
  return AttributeSchema(std::move(attrs));
}

// One item under a schema, stored as the active level of each attribute; the
// one-hot form (exactly one 1 per attribute block) is produced on demand.
class ItemVector {
 public:
  ItemVector() = default;

  static ItemVector from_levels(const AttributeSchema& schema, std::vector<std::size_t> levels) {
    if (levels.size() != schema.attribute_count())
      throw ValidationError("item has " + std::to_string(levels.size()) + " attributes, schema has " +
                            std::to_string(schema.attribute_count()));
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] >= schema.level_count(i))
        throw ValidationError("level " + std::to_string(levels[i]) + " out of range for attribute '" +
                              schema.attribute(i).name + "'");
    ItemVector v;
    v.levels_ = std::move(levels);
    return v;
  }

  static ItemVector from_one_hot(const AttributeSchema& schema, std::span<const double> x) {
    if (x.size() != schema.width())
      throw ValidationError("one-hot width " + std::to_string(x.size()) + " != schema width " +
                            std::to_string(schema.width()));
    std::vector<std::size_t> levels;
    for (std::size_t i = 0; i < schema.attribute_count(); ++i) {
      std::size_t active = 0, count = 0;
      for (std::size_t j = 0; j < schema.level_count(i); ++j) {
        const double v = x[schema.offset(i) + j];
        if (v == 1.0) {
          active = j;
          ++count;
        } else if (v != 0.0) {
          throw ValidationError("one-hot value " + std::to_string(v) + " in attribute '" +
                                schema.attribute(i).name + "'");
        }
      }
      if (count != 1)
        throw ValidationError("attribute '" + schema.attribute(i).name + "' has " + std::to_string(count) +
                              " active levels");
      levels.push_back(active);
    }
    return from_levels(schema, std::move(levels));
  }

  const std::vector<std::size_t>& levels() const { return levels_; }
  std::size_t level(std::size_t attribute) const { return levels_.at(attribute); }
  std::size_t attribute_count() const { return levels_.size(); }

  void write_one_hot(const AttributeSchema& schema, std::span<double> out) const {
    check(schema);
    if (out.size() != schema.width()) throw ShapeError("one-hot output span has wrong width");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < levels_.size(); ++i) out[schema.offset(i) + levels_[i]] = 1.0;
  }

  std::vector<double> one_hot(const AttributeSchema& schema) const {
    std::vector<double> out(schema.width());
    write_one_hot(schema, out);
    return out;
  }

  void check(const AttributeSchema& schema) const {
    if (levels_.size() != schema.attribute_count())
      throw ValidationError("item/schema mismatch: item has " + std::to_string(levels_.size()) +
                            " attributes, schema has " + std::to_string(schema.attribute_count()));
    for (std::size_t i = 0; i < levels_.size(); ++i)
      if (levels_[i] >= schema.level_count(i))
        throw ValidationError("item/schema mismatch at attribute '" + schema.attribute(i).name + "'");
  }

  friend bool operator==(const ItemVector&, const ItemVector&) = default;

 private:
  std::vector<std::size_t> levels_;
};

// Joins per-option items into one item of the concatenated schema.
inline ItemVector concat_items(const AttributeSchema& combined, std::span<const ItemVector> items) {
  std::vector<std::size_t> levels;
  for (const auto& it : items) levels.insert(levels.end(), it.levels().begin(), it.levels().end());
  return ItemVector::from_levels(combined, std::move(levels));
}

// Stacks the one-hot encodings of `items` as rows.
inline Matrix one_hot_matrix(const AttributeSchema& schema, std::span<const ItemVector> items) {
  Matrix m(items.size(), schema.width());
  for (std::size_t r = 0; r < items.size(); ++r) items[r].write_one_hot(schema, m.row(r));
  return m;
}

inline nlohmann::json schema_to_json(const AttributeSchema& schema) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : schema.attributes()) attrs.push_back({{"name", a.name}, {"levels", a.levels}});
  return nlohmann::json{{"attributes", attrs}};
}

inline AttributeSchema schema_from_json(const nlohmann::json& j) {
  try {
    std::vector<Attribute> attrs;
    for (const auto& a : j.at("attributes")) {
      Attribute attr{a.at("name").get<std::string>(), {}};
      for (const auto& level : a.at("levels"))
        attr.levels.push_back(level.is_string() ? level.get<std::string>() : level.dump());
      attrs.push_back(std::move(attr));
    }
    return AttributeSchema(std::move(attrs));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed schema: ") + e.what());
  }
}

}  // namespace conjointnet
