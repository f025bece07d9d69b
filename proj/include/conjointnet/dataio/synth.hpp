#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "conjointnet/conjoint/partworths.hpp"
#include "conjointnet/dataio/dataset.hpp"

namespace conjointnet {

struct SynthResult {
  Dataset dataset;
  double bayes_accuracy = 0.0;
};

inline ItemVector random_item(const AttributeSchema& schema, Rng& rng) {
  std::vector<std::size_t> lv;
  lv.reserve(schema.attribute_count());
  for (std::size_t i = 0; i < schema.attribute_count(); ++i)
    lv.push_back(std::uniform_int_distribution<std::size_t>(0, schema.level_count(i) - 1)(rng));
  return ItemVector::from_levels(schema, std::move(lv));
}

// i.i.d. N(0, scale^2) partworths.
inline PartworthTable random_partworths(const AttributeSchema& schema, Rng& rng, double scale = 1.0) {
  PartworthTable w(schema);
  std::normal_distribution<double> n(0.0, scale);
  for (std::size_t i = 0; i < schema.attribute_count(); ++i)
    for (std::size_t j = 0; j < schema.level_count(i); ++j) w.at(i, j) = n(rng);
  return w;
}

namespace detail {

inline bool bernoulli(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

// Utility of every item of the schema (mixed-radix enumeration, first attribute slowest).
inline std::vector<double> enumerate_utilities(const PartworthTable& w) {
  const auto& schema = w.schema();
  std::vector<double> u{0.0};
  for (std::size_t i = 0; i < schema.attribute_count(); ++i) {
    std::vector<double> next;
    next.reserve(u.size() * schema.level_count(i));
    for (double base : u)
      for (std::size_t j = 0; j < schema.level_count(i); ++j) next.push_back(base + w(i, j));
    u = std::move(next);
  }
  return u;
}

inline void stamp_meta(Dataset& ds, const std::string& generator, std::uint64_t seed, double bayes) {
  ds.meta["source"] = "synthetic";
  ds.meta["generator"] = generator;
  ds.meta["seed"] = seed;
  ds.meta["bayes_accuracy"] = bayes;
}

}  // namespace detail

// E over uniform item pairs of max(p, 1 - p), p = sigmoid(U(A) - U(B)).
// Exact enumeration up to `max_items` items, seeded Monte Carlo beyond.
inline double linear_bayes_accuracy(const PartworthTable& w, std::size_t max_items = 4096, std::uint64_t seed = 0,
                                    std::size_t samples = 200000) {
  const auto& schema = w.schema();
  if (schema.item_count() <= max_items) {
    const auto u = detail::enumerate_utilities(w);
    double total = 0.0;
    for (double ua : u)
      for (double ub : u) {
        const double p = sigmoid(ua - ub);
        total += std::max(p, 1.0 - p);
      }
    return total / (static_cast<double>(u.size()) * static_cast<double>(u.size()));
  }
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double p = sigmoid(utility(w, random_item(schema, rng)) - utility(w, random_item(schema, rng)));
    total += std::max(p, 1.0 - p);
  }
  return total / static_cast<double>(samples);
}

// Pairs of uniform items labeled y ~ Bernoulli(sigmoid(U*(A) - U*(B))).
inline SynthResult synth_linear(const PartworthTable& w_star, std::size_t n_pairs, std::uint64_t seed) {
  const auto& schema = w_star.schema();
  Rng rng(seed);
  SynthResult out;
  out.dataset.schema = schema;
  out.dataset.records.reserve(n_pairs);
  for (std::size_t r = 0; r < n_pairs; ++r) {
    ItemVector a = random_item(schema, rng);
    ItemVector b = random_item(schema, rng);
    const int y = detail::bernoulli(rng, sigmoid(utility(w_star, a) - utility(w_star, b))) ? 1 : 0;
    out.dataset.records.push_back({"s" + std::to_string(r), "", {std::move(a), std::move(b)}, y, {}});
  }
  out.bayes_accuracy = linear_bayes_accuracy(w_star, 4096, seed ^ 0x9e3779b97f4a7c15ULL);
  detail::stamp_meta(out.dataset, "linear", seed, out.bayes_accuracy);
  out.dataset.meta["w_star"] = partworths_to_json(w_star);
  out.dataset.meta["preferred_pairing"] = "pairwise";
  return out;
}

enum class InteractionKind { XOR, Threshold };

inline const char* to_string(InteractionKind k) { return k == InteractionKind::XOR ? "xor" : "threshold"; }

inline InteractionKind interaction_kind_from_string(const std::string& s) {
  if (s == "xor" || s == "XOR") return InteractionKind::XOR;
  if (s == "threshold") return InteractionKind::Threshold;
  throw ValidationError("unknown interaction kind '" + s + "'");
}

// The non-additive rule behind synth_interaction.
//   XOR: parity of the first two binary attributes.
//   Threshold: every one of the first two attributes sits in the upper half of
//   its levels (level >= k/2), a conjunctive rule no weighted sum reproduces.
class InteractionRule {
 public:
  InteractionRule(const AttributeSchema& schema, InteractionKind kind) : kind_(kind) {
    if (kind == InteractionKind::XOR) {
      for (std::size_t i = 0; i < schema.attribute_count() && attrs_.size() < 2; ++i)
        if (schema.level_count(i) == 2) attrs_.push_back(i);
      if (attrs_.size() < 2) throw ValidationError("XOR generator needs at least two binary attributes");
    } else {
      if (schema.attribute_count() < 2) throw ValidationError("threshold generator needs at least two attributes");
      attrs_ = {0, 1};
      for (std::size_t i : attrs_) cut_.push_back(schema.level_count(i) / 2);
    }
  }

  int operator()(const ItemVector& x) const {
    if (kind_ == InteractionKind::XOR) return static_cast<int>((x.level(attrs_[0]) + x.level(attrs_[1])) % 2);
    for (std::size_t k = 0; k < attrs_.size(); ++k)
      if (x.level(attrs_[k]) < cut_[k]) return 0;
    return 1;
  }

  const std::vector<std::size_t>& attributes() const { return attrs_; }

 private:
  InteractionKind kind_;
  std::vector<std::size_t> attrs_;
  std::vector<std::size_t> cut_;
};

// Single-vector data: one uniform item per record, y = rule(x) flipped with probability `noise`.
inline SynthResult synth_interaction(const AttributeSchema& schema, InteractionKind kind, std::size_t n, double noise,
                                     std::uint64_t seed) {
  if (!(noise >= 0.0 && noise <= 0.5)) throw ValidationError("noise must be in [0, 0.5]");
  const InteractionRule rule(schema, kind);
  Rng rng(seed);
  SynthResult out;
  out.dataset.schema = schema;
  for (std::size_t r = 0; r < n; ++r) {
    ItemVector x = random_item(schema, rng);
    int y = rule(x);
    if (detail::bernoulli(rng, noise)) y = 1 - y;
    out.dataset.records.push_back({"s" + std::to_string(r), "", {std::move(x)}, y, {}});
  }
  out.bayes_accuracy = 1.0 - noise;
  detail::stamp_meta(out.dataset, to_string(kind), seed, out.bayes_accuracy);
  out.dataset.meta["noise"] = noise;
  out.dataset.meta["rule_attributes"] = rule.attributes();
  out.dataset.meta["preferred_pairing"] = "single";
  return out;
}

// Pairwise variant: A and B are drawn until they disagree under the rule; A is
// preferred (y = 1) when it satisfies the rule, flipped with probability `noise`.
inline SynthResult synth_interaction_pairs(const AttributeSchema& schema, InteractionKind kind, std::size_t n,
                                           double noise, std::uint64_t seed) {
  if (!(noise >= 0.0 && noise <= 0.5)) throw ValidationError("noise must be in [0, 0.5]");
  const InteractionRule rule(schema, kind);
  Rng rng(seed);
  SynthResult out;
  out.dataset.schema = schema;
  for (std::size_t r = 0; r < n; ++r) {
    ItemVector a, b;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == 100000) throw ValidationError("interaction rule is constant on this schema");
      a = random_item(schema, rng);
      b = random_item(schema, rng);
      if (rule(a) != rule(b)) break;
    }
    int y = rule(a);
    if (detail::bernoulli(rng, noise)) y = 1 - y;
    out.dataset.records.push_back({"s" + std::to_string(r), "", {std::move(a), std::move(b)}, y, {}});
  }
  out.bayes_accuracy = 1.0 - noise;
  detail::stamp_meta(out.dataset, std::string(to_string(kind)) + "_pairs", seed, out.bayes_accuracy);
  out.dataset.meta["noise"] = noise;
  out.dataset.meta["rule_attributes"] = rule.attributes();
  out.dataset.meta["preferred_pairing"] = "pairwise";
  return out;
}

// Unlabeled-style items around `n_clusters` random prototypes; each attribute
// is resampled uniformly with probability `flip_prob`. y = cluster % 2.
inline SynthResult synth_clustered(const AttributeSchema& schema, std::size_t n_clusters, std::size_t n,
                                   double flip_prob, std::uint64_t seed) {
  if (n_clusters == 0) throw ValidationError("n_clusters must be positive");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ValidationError("flip_prob must be in [0,1]");
  Rng rng(seed);
  std::vector<ItemVector> prototypes;
  for (std::size_t c = 0; c < n_clusters; ++c) prototypes.push_back(random_item(schema, rng));
  SynthResult out;
  out.dataset.schema = schema;
  std::vector<std::size_t> cluster_of;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = std::uniform_int_distribution<std::size_t>(0, n_clusters - 1)(rng);
    std::vector<std::size_t> lv = prototypes[c].levels();
    for (std::size_t i = 0; i < lv.size(); ++i)
      if (detail::bernoulli(rng, flip_prob))
        lv[i] = std::uniform_int_distribution<std::size_t>(0, schema.level_count(i) - 1)(rng);
    out.dataset.records.push_back(
        {"s" + std::to_string(r), "", {ItemVector::from_levels(schema, std::move(lv))}, static_cast<int>(c % 2), {}});
    cluster_of.push_back(c);
  }
  // Best per-attribute reconstruction: the prototype level, wrong only when a flip changed it.
  double expected = 0.0;
  for (std::size_t i = 0; i < schema.attribute_count(); ++i)
    expected += 1.0 - flip_prob * (1.0 - 1.0 / static_cast<double>(schema.level_count(i)));
  out.bayes_accuracy = expected / static_cast<double>(schema.attribute_count());
  detail::stamp_meta(out.dataset, "clustered", seed, out.bayes_accuracy);
  out.dataset.meta["n_clusters"] = n_clusters;
  out.dataset.meta["flip_prob"] = flip_prob;
  out.dataset.meta["cluster"] = cluster_of;
  return out;
}

// Uniform schema: `attributes` attributes named a0, a1, ... each with `levels` levels "0".."k-1".
inline AttributeSchema uniform_schema(std::size_t attributes, std::size_t levels, const std::string& prefix = "a") {
  std::vector<Attribute> attrs;
  for (std::size_t i = 0; i < attributes; ++i) {
    Attribute a{prefix + std::to_string(i), {}};
    for (std::size_t j = 0; j < levels; ++j) a.levels.push_back(std::to_string(j));
    attrs.push_back(std::move(a));
  }
  return AttributeSchema(std::move(attrs));
}

}  // namespace conjointnet
