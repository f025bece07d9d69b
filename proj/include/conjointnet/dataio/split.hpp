#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "conjointnet/dataio/dataset.hpp"

namespace conjointnet {

struct SplitConfig {
  double test_ratio = 0.3;
  // Fraction of the non-test records carved out for checkpoint selection.
  double val_ratio = 0.1;
  bool by_respondent = false;
  std::uint64_t seed = 0;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  SplitConfig config;
};

inline nlohmann::json split_to_json(const DatasetSplit& s) {
  return {{"seed", s.config.seed},
          {"test_ratio", s.config.test_ratio},
          {"val_ratio", s.config.val_ratio},
          {"by_respondent", s.config.by_respondent},
          {"train", s.train.size()},
          {"validation", s.validation.size()},
          {"test", s.test.size()}};
}

namespace detail {

inline void check_split_config(std::size_t n, const SplitConfig& cfg) {
  if (n < 3) throw ValidationError("split needs at least 3 records, got " + std::to_string(n));
  if (!(cfg.test_ratio > 0.0 && cfg.test_ratio < 1.0)) throw ValidationError("test_ratio must be in (0,1)");
  if (!(cfg.val_ratio >= 0.0 && cfg.val_ratio < 1.0)) throw ValidationError("val_ratio must be in [0,1)");
}

inline std::size_t test_target(std::size_t n, const SplitConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.test_ratio * static_cast<double>(n)));
}

inline std::size_t val_target(std::size_t rest, const SplitConfig& cfg) {
  return static_cast<std::size_t>(std::floor(cfg.val_ratio * static_cast<double>(rest)));
}

inline void sort_parts(DatasetSplit& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
}

}  // namespace detail

// Record-level split: |test| = floor(0.3 n), |val| = floor(0.1 (n - |test|)), rest train.
inline DatasetSplit split(std::size_t n, const SplitConfig& cfg) {
  detail::check_split_config(n, cfg);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test = detail::test_target(n, cfg);
  const std::size_t n_val = detail::val_target(n - n_test, cfg);
  DatasetSplit s;
  s.config = cfg;
  s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                      order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  detail::sort_parts(s);
  return s;
}

// Respondent-level split: users are shuffled and assigned whole, filling test
// then validation up to their record targets; partition sizes are approximate.
inline DatasetSplit split_by_group(std::span<const std::string> groups, const SplitConfig& cfg) {
  const std::size_t n = groups.size();
  detail::check_split_config(n, cfg);
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[groups[i]].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [name, idx] : members) order.push_back(&idx);
  Rng rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test = detail::test_target(n, cfg);
  DatasetSplit s;
  s.config = cfg;
  std::size_t g = 0;
  for (; g < order.size() && s.test.size() < n_test; ++g) s.test.insert(s.test.end(), order[g]->begin(), order[g]->end());
  const std::size_t n_val = detail::val_target(n - s.test.size(), cfg);
  for (; g < order.size() && s.validation.size() < n_val; ++g)
    s.validation.insert(s.validation.end(), order[g]->begin(), order[g]->end());
  for (; g < order.size(); ++g) s.train.insert(s.train.end(), order[g]->begin(), order[g]->end());
  if (s.train.empty()) throw ValidationError("respondent split left no training records");
  detail::sort_parts(s);
  return s;
}

inline DatasetSplit split(const Dataset& ds, const SplitConfig& cfg) {
  if (!cfg.by_respondent) return split(ds.size(), cfg);
  std::vector<std::string> users;
  users.reserve(ds.size());
  for (const auto& r : ds.records) users.push_back(r.user);
  return split_by_group(users, cfg);
}

}  // namespace conjointnet
