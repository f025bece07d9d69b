#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "conjointnet/autoencoder.hpp"
#include "conjointnet/conjoint/linear.hpp"
#include "conjointnet/dataio/dataset.hpp"
#include "conjointnet/dataio/hash.hpp"
#include "conjointnet/dataio/split.hpp"
#include "conjointnet/harness/metrics.hpp"
#include "conjointnet/harness/report.hpp"
#include "conjointnet/residual_net.hpp"
#include "conjointnet/ssl_net.hpp"

namespace conjointnet {

enum class InputEncoding { OneHot, Numeric };

inline const char* to_string(InputEncoding e) { return e == InputEncoding::OneHot ? "onehot" : "numeric"; }

inline InputEncoding input_encoding_from_string(const std::string& s) {
  if (s == "onehot" || s == "one_hot") return InputEncoding::OneHot;
  if (s == "numeric") return InputEncoding::Numeric;
  throw ValidationError("unknown input_encoding '" + s + "'");
}

// Options fed to a pretrain-then-classify run when no encoder checkpoint is given.
struct PretrainSpec {
  AEConfig ae;
  AETrainConfig train;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::string output_dir;

  std::string dataset_path;
  bool append_context = false;

  std::string model_type = "conjoint";  // conjoint | ssl | residual
  std::optional<Pairing> pairing;       // default: dataset preference
  InputEncoding input_encoding = InputEncoding::OneHot;
  FitConfig conjoint;
  ResidualConfig residual;
  SSLConfig ssl;
  std::string encoder_path;
  std::optional<PretrainSpec> pretrain;

  TrainConfig train;
  SplitConfig split;
  bool split_seed_set = false;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
}

inline nlohmann::json section(const nlohmann::json& j, const char* key) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key) : nlohmann::json::object();
}

}  // namespace detail

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  detail::check_keys(j, {"max_epochs", "batch_size", "optimizer", "learning_rate"}, "train");
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("optimizer")) c.optimizer.kind = optimizer_kind_from_string(j.at("optimizer").get<std::string>());
  c.optimizer.learning_rate = j.value("learning_rate", c.optimizer.learning_rate);
  if (c.max_epochs == 0 || c.max_epochs > 100) throw ValidationError("train.max_epochs must be in [1, 100]");
  if (c.batch_size == 0) throw ValidationError("train.batch_size must be positive");
  if (!(c.optimizer.learning_rate > 0.0)) throw ValidationError("train.learning_rate must be positive");
  return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"optimizer", c.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
          {"learning_rate", c.optimizer.learning_rate}};
}

inline SplitConfig split_config_from_json(const nlohmann::json& j, SplitConfig c, bool& seed_set) {
  detail::check_keys(j, {"test_ratio", "val_ratio", "by_respondent", "seed"}, "split");
  c.test_ratio = j.value("test_ratio", c.test_ratio);
  c.val_ratio = j.value("val_ratio", c.val_ratio);
  c.by_respondent = j.value("by_respondent", c.by_respondent);
  seed_set = j.contains("seed") && !j.at("seed").is_null();
  if (seed_set) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline nlohmann::json split_config_to_json(const SplitConfig& c) {
  return {{"test_ratio", c.test_ratio}, {"val_ratio", c.val_ratio}, {"by_respondent", c.by_respondent}, {"seed", c.seed}};
}

inline PretrainSpec pretrain_spec_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"hidden_dims", "latent_dim", "variant", "recon", "kl_weight", "batch_norm", "max_epochs",
                      "batch_size", "optimizer", "learning_rate", "val_fraction"},
                     "ae");
  PretrainSpec p;
  nlohmann::json ae = nlohmann::json::object();
  nlohmann::json tr = nlohmann::json::object();
  for (const auto& [k, v] : j.items()) {
    if (k == "max_epochs" || k == "batch_size" || k == "optimizer" || k == "learning_rate")
      tr[k] = v;
    else if (k != "val_fraction")
      ae[k] = v;
  }
  p.ae = ae_config_from_json(ae);
  p.train.train = train_config_from_json(tr);
  p.train.val_fraction = j.value("val_fraction", p.train.val_fraction);
  return p;
}

inline nlohmann::json pretrain_spec_to_json(const PretrainSpec& p) {
  nlohmann::json j = ae_config_to_json(p.ae);
  j.erase("input_dim");
  j.erase("blocks");
  j.update(train_config_to_json(p.train.train));
  j["val_fraction"] = p.train.val_fraction;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  try {
    detail::check_keys(j, {"name", "seed", "output_dir", "dataset", "model", "train", "split"}, "config");
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);

    const auto ds = detail::section(j, "dataset");
    detail::check_keys(ds, {"path", "append_context"}, "dataset");
    c.dataset_path = ds.value("path", c.dataset_path);
    c.append_context = ds.value("append_context", c.append_context);

    const auto m = detail::section(j, "model");
    detail::check_keys(m, {"type", "pairing", "input_encoding", "conjoint", "residual", "ssl"}, "model");
    c.model_type = m.value("type", c.model_type);
    if (c.model_type != "conjoint" && c.model_type != "ssl" && c.model_type != "residual")
      throw ValidationError("model.type must be conjoint, ssl or residual, got '" + c.model_type + "'");
    if (m.contains("pairing") && !m.at("pairing").is_null())
      c.pairing = pairing_from_string(m.at("pairing").get<std::string>());
    if (m.contains("input_encoding")) c.input_encoding = input_encoding_from_string(m.at("input_encoding").get<std::string>());

    const auto cj = detail::section(m, "conjoint");
    detail::check_keys(cj, {"l2", "max_iterations", "tolerance"}, "model.conjoint");
    c.conjoint.l2 = cj.value("l2", c.conjoint.l2);
    c.conjoint.max_iterations = cj.value("max_iterations", c.conjoint.max_iterations);
    c.conjoint.tolerance = cj.value("tolerance", c.conjoint.tolerance);

    const auto rj = detail::section(m, "residual");
    detail::check_keys(rj, {"hidden_nodes", "residual_scale", "residual_l2", "linear_l2", "freeze_residual", "warm_start_linear"},
                       "model.residual");
    c.residual = residual_config_from_json(rj);

    auto sj = detail::section(m, "ssl");
    detail::check_keys(sj,
                       {"classifier_hidden_dims", "encoder_mode", "encoder_lr_scale", "augment_swapped", "latent_dim",
                        "encoder", "pretrain"},
                       "model.ssl");
    c.encoder_path = sj.value("encoder", std::string());
    if (sj.contains("pretrain") && !sj.at("pretrain").is_null()) c.pretrain = pretrain_spec_from_json(sj.at("pretrain"));
    sj.erase("encoder");
    sj.erase("pretrain");
    c.ssl = ssl_config_from_json(sj);

    c.train = train_config_from_json(detail::section(j, "train"));
    c.split = split_config_from_json(detail::section(j, "split"), c.split, c.split_seed_set);
    if (!c.split_seed_set) c.split.seed = c.seed;
    c.train.seed = c.seed + 1;
    if (c.model_type == "ssl" && c.encoder_path.empty() && !c.pretrain)
      throw ValidationError("ssl model needs model.ssl.encoder (checkpoint path) or model.ssl.pretrain");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  }
}

// The fully resolved configuration, defaults included.
inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json ssl = ssl_config_to_json(c.ssl);
  ssl.erase("n_options");
  if (!c.encoder_path.empty()) ssl["encoder"] = c.encoder_path;
  if (c.pretrain) ssl["pretrain"] = pretrain_spec_to_json(*c.pretrain);
  nlohmann::json residual = residual_config_to_json(c.residual);
  residual.erase("pairing");
  return {{"name", c.name},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"dataset", {{"path", c.dataset_path}, {"append_context", c.append_context}}},
          {"model",
           {{"type", c.model_type},
            {"pairing", c.pairing ? nlohmann::json(to_string(*c.pairing)) : nlohmann::json()},
            {"input_encoding", to_string(c.input_encoding)},
            {"conjoint", {{"l2", c.conjoint.l2}, {"max_iterations", c.conjoint.max_iterations}, {"tolerance", c.conjoint.tolerance}}},
            {"residual", residual},
            {"ssl", ssl}}},
          {"train", train_config_to_json(c.train)},
          {"split", split_config_to_json(c.split)}};
}

// `key` is a dotted path ("train.max_epochs"); `value` is parsed as JSON when
// possible and kept as a string otherwise.
inline void apply_override(nlohmann::json& config, const std::string& key, const std::string& value) {
  if (key.empty()) throw ValidationError("empty override key");
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("malformed override key '" + key + "'");
    if (!node->is_object()) throw ValidationError("override '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Model views of a dataset

inline Pairing resolve_pairing(const std::optional<Pairing>& requested, const Dataset& ds) {
  if (requested) return *requested;
  const std::string pref = ds.meta.value("preferred_pairing", std::string());
  if (pref == "single") return Pairing::SingleVector;
  if (pref == "pairwise") return Pairing::Pairwise;
  return ds.option_count() == 2 ? Pairing::Pairwise : Pairing::SingleVector;
}

// Model input for `indices` under the chosen pairing and encoding. Pairwise
// needs exactly two options; SingleVector concatenates all options.
inline ChoiceBatch make_batch(const Dataset& ds, std::span<const std::size_t> indices, Pairing pairing,
                              InputEncoding encoding = InputEncoding::OneHot) {
  if (pairing == Pairing::Pairwise && ds.option_count() != 2)
    throw ValidationError("pairwise models need records with exactly two options");
  if (encoding == InputEncoding::OneHot) return to_batch(ds, indices, pairing);
  const Matrix all = numeric_matrix(ds, indices);
  ChoiceBatch b;
  if (pairing == Pairing::SingleVector) {
    b.options.push_back(all);
  } else {
    const std::size_t m = ds.schema.attribute_count();
    b.options.push_back(slice_cols(all, 0, m));
    b.options.push_back(slice_cols(all, m, m));
  }
  for (std::size_t i : indices) b.targets.push_back(ds.records.at(i).y);
  return b;
}

inline std::size_t encoded_width(const Dataset& ds, Pairing pairing, InputEncoding encoding) {
  const std::size_t per_option = encoding == InputEncoding::OneHot ? ds.schema.width() : ds.schema.attribute_count();
  return pairing == Pairing::Pairwise ? per_option : per_option * ds.option_count();
}

// ---------------------------------------------------------------------------
// Checkpoints

using ChoiceModel = std::variant<LinearConjoint, SSLNet, ResidualNet>;

struct Checkpoint {
  std::string kind;  // conjoint | ssl | residual | ae
  AttributeSchema schema;
  std::size_t option_count = 2;
  Pairing pairing = Pairing::Pairwise;
  InputEncoding encoding = InputEncoding::OneHot;
  SplitConfig split;
  std::string dataset_path;
  nlohmann::json model;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  return {{"format", "conjointnet-checkpoint"},
          {"version", 1},
          {"kind", c.kind},
          {"schema", schema_to_json(c.schema)},
          {"option_count", c.option_count},
          {"pairing", to_string(c.pairing)},
          {"input_encoding", to_string(c.encoding)},
          {"split", split_config_to_json(c.split)},
          {"dataset_path", c.dataset_path},
          {"model", c.model}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "conjointnet-checkpoint") throw DataError("not a conjointnet checkpoint");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported checkpoint version");
    Checkpoint c;
    c.kind = j.at("kind").get<std::string>();
    c.schema = schema_from_json(j.at("schema"));
    c.option_count = j.at("option_count").get<std::size_t>();
    c.pairing = pairing_from_string(j.at("pairing").get<std::string>());
    c.encoding = input_encoding_from_string(j.at("input_encoding").get<std::string>());
    bool seed_set = false;
    c.split = split_config_from_json(j.at("split"), {}, seed_set);
    c.dataset_path = j.value("dataset_path", std::string());
    c.model = j.at("model");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ValidationError& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::filesystem::path file(path);
  if (std::filesystem::is_directory(file)) file /= "checkpoint.json";
  return checkpoint_from_json(read_json_file(file.string(), "checkpoint"));
}

inline ChoiceModel choice_model_from_checkpoint(const Checkpoint& c) {
  try {
    if (c.kind == "conjoint") return LinearConjoint::from_json(c.model);
    if (c.kind == "ssl") return SSLNet::from_json(c.model);
    if (c.kind == "residual") return ResidualNet::from_json(c.model);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model in checkpoint: ") + e.what());
  }
  throw ValidationError("checkpoint kind '" + c.kind + "' is not a choice model");
}

inline Matrix model_logits(const ChoiceModel& model, const ChoiceBatch& batch) {
  return std::visit([&](const auto& m) { return m.logits(batch); }, model);
}

// Batch layout a checkpointed model expects (SSL always takes options separately).
inline ChoiceBatch checkpoint_batch(const Checkpoint& c, const Dataset& ds, std::span<const std::size_t> indices) {
  if (!(ds.schema == c.schema)) throw DataError("dataset schema does not match the checkpoint's schema");
  if (ds.option_count() != c.option_count) throw DataError("dataset option count does not match the checkpoint");
  if (c.kind == "ssl") return to_batch(ds, indices, Pairing::Pairwise);
  return make_batch(ds, indices, c.pairing, c.encoding);
}

// Metrics of a checkpoint on one partition ("train", "val", "test" or "all").
inline MetricSet evaluate_checkpoint(const Checkpoint& c, const Dataset& ds, const std::string& partition) {
  std::vector<std::size_t> idx;
  if (partition == "all") {
    idx = all_indices(ds);
  } else {
    const DatasetSplit s = split(ds, c.split);
    if (partition == "test")
      idx = s.test;
    else if (partition == "val" || partition == "validation")
      idx = s.validation;
    else if (partition == "train")
      idx = s.train;
    else
      throw ValidationError("unknown split '" + partition + "' (train, val, test, all)");
  }
  if (idx.empty()) throw ValidationError("split '" + partition + "' is empty");
  const ChoiceModel model = choice_model_from_checkpoint(c);
  const ChoiceBatch batch = checkpoint_batch(c, ds, idx);
  const auto scores = sigmoid_scores(model_logits(model, batch));
  return evaluate_scores_lenient(scores, batch.targets);
}

// ---------------------------------------------------------------------------
// Runs

struct ExperimentResult {
  ExperimentConfig config;
  TrainReport report;
  Checkpoint checkpoint;
  DatasetSplit split;
  std::string input_hash;
  std::optional<PartworthTable> partworths;
  std::optional<ResidualDiagnostics> diagnostics;
  std::optional<TrainReport> pretrain_report;
};

namespace detail {

inline std::string dataset_fingerprint(const ExperimentConfig& c, const Dataset& ds, bool preloaded) {
  if (!preloaded && !c.dataset_path.empty()) return file_hash(c.dataset_path);
  return "fnv1a64:" + hex64(fnv1a(dataset_to_json(ds).dump()));
}

inline Dataset load_experiment_dataset(const ExperimentConfig& c, const Dataset* preloaded) {
  Dataset ds = preloaded ? *preloaded : [&] {
    if (c.dataset_path.empty()) throw ValidationError("dataset.path is required");
    return load_dataset(c.dataset_path);
  }();
  ds.validate();
  return c.append_context ? append_context(ds) : ds;
}

inline std::vector<std::size_t> concat(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out = a;
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

// Writes into a sibling temp directory and renames it into place; on any
// failure the partial directory is removed.
template <class Fn>
void write_output_dir(const std::string& dir, Fn&& write) {
  namespace fs = std::filesystem;
  const fs::path target(dir);
  const fs::path tmp = target.string() + ".partial-" + hex64(fnv1a(target.string())).substr(0, 8);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::create_directories(tmp);
    write(tmp);
    fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    throw DataError(std::string("output directory: ") + e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

inline TrainReport conjoint_report(const FitResult& fit, const LinearConjoint& model, const ChoiceBatch& train,
                                   const ChoiceBatch& val) {
  TrainReport r;
  r.model = "conjoint";
  r.selection = "converged";
  EpochRecord e;
  e.epoch = 1;
  const auto t = evaluate_classifier(model, train);
  e.train_loss = t.loss;
  e.train_accuracy = t.accuracy;
  if (val.size() > 0) {
    const auto v = evaluate_classifier(model, val);
    e.val_loss = v.loss;
    e.val_accuracy = v.accuracy;
  }
  r.history.push_back(e);
  r.best_epoch = 1;
  r.extra = {{"newton_iterations", fit.iterations},
             {"converged", fit.converged},
             {"final_objective", fit.final_loss},
             {"degenerate_targets", fit.degenerate_targets}};
  return r;
}

}  // namespace detail

// Pretrains an autoencoder on every option of the given records.
inline AutoEncoder pretrain_autoencoder(const Dataset& ds, std::span<const std::size_t> indices, PretrainSpec spec,
                                        std::uint64_t seed, TrainReport* report = nullptr) {
  spec.ae.input_dim = ds.schema.width();
  spec.ae.blocks = ds.schema.level_counts();
  spec.ae.validate();
  Rng init(seed);
  AutoEncoder ae(spec.ae, init);
  spec.train.train.seed = seed + 1;
  TrainReport r = train_ae(ae, item_matrix(ds, indices), spec.train);
  if (report) *report = std::move(r);
  return ae;
}

// Trains the configured model on the train split, selects the checkpoint on
// validation, evaluates once on test and (with output_dir set) writes the run.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset* preloaded = nullptr) {
  ExperimentResult res;
  res.config = config;
  const Dataset ds = detail::load_experiment_dataset(config, preloaded);
  res.input_hash = detail::dataset_fingerprint(config, ds, preloaded != nullptr);
  res.split = split(ds, config.split);
  const auto& sp = res.split;
  if (sp.train.empty()) throw ValidationError("training split is empty");
  if (sp.test.empty()) throw ValidationError("test split is empty");

  Checkpoint& ck = res.checkpoint;
  ck.kind = config.model_type;
  ck.schema = ds.schema;
  ck.option_count = ds.option_count();
  ck.split = config.split;
  ck.dataset_path = config.dataset_path;
  ck.pairing = resolve_pairing(config.pairing, ds);
  ck.encoding = config.input_encoding;

  Rng init(config.seed);
  ChoiceBatch test_batch;
  std::optional<ChoiceModel> trained;

  if (config.model_type == "conjoint") {
    if (config.input_encoding != InputEncoding::OneHot) throw ValidationError("conjoint model requires onehot encoding");
    FitResult fit_res;
    if (ck.pairing == Pairing::Pairwise) {
      const auto pairs = to_pairs(ds, sp.train);
      fit_res = fit(ds.schema, pairs, config.conjoint);
    } else {
      const auto items = to_labeled(ds, sp.train);
      fit_res = fit_single(single_vector_schema(ds), items, config.conjoint);
    }
    LinearConjoint model(fit_res.partworths, fit_res.intercept, ck.pairing);
    res.report = detail::conjoint_report(fit_res, model, make_batch(ds, sp.train, ck.pairing),
                                         make_batch(ds, sp.validation, ck.pairing));
    res.partworths = fit_res.partworths;
    ck.model = model.to_json();
    test_batch = make_batch(ds, sp.test, ck.pairing);
    trained = std::move(model);
  } else if (config.model_type == "residual") {
    ResidualConfig rc = config.residual;
    rc.pairing = ck.pairing;
    ResidualNet model(encoded_width(ds, ck.pairing, ck.encoding), rc, init);
    res.report = train_residual(model, make_batch(ds, sp.train, ck.pairing, ck.encoding),
                                make_batch(ds, sp.validation, ck.pairing, ck.encoding), config.train);
    if (ck.encoding == InputEncoding::OneHot) {
      const AttributeSchema s = ck.pairing == Pairing::Pairwise ? ds.schema : single_vector_schema(ds);
      res.partworths = model.extract_linear_partworths(s);
      // Diagnostics over the held-out items, one row per option (pairwise) or record.
      Matrix items = ck.pairing == Pairing::Pairwise ? item_matrix(ds, sp.test) : to_batch(ds, sp.test, ck.pairing).options[0];
      res.diagnostics = residual_diagnostics(model, items);
    }
    ck.model = model.to_json();
    test_batch = make_batch(ds, sp.test, ck.pairing, ck.encoding);
    trained = std::move(model);
  } else {
    if (config.input_encoding != InputEncoding::OneHot) throw ValidationError("ssl model requires onehot encoding");
    AutoEncoder ae = [&] {
      if (!config.encoder_path.empty()) {
        const Checkpoint enc = load_checkpoint(config.encoder_path);
        if (enc.kind != "ae") throw ValidationError("model.ssl.encoder is not an autoencoder checkpoint");
        if (!(enc.schema == ds.schema)) throw DataError("encoder checkpoint schema does not match the dataset");
        return AutoEncoder::from_json(enc.model);
      }
      TrainReport pre;
      AutoEncoder out = pretrain_autoencoder(ds, detail::concat(sp.train, sp.validation), *config.pretrain,
                                             config.seed + 2, &pre);
      res.pretrain_report = std::move(pre);
      return out;
    }();
    SSLConfig sc = config.ssl;
    sc.n_options = ds.option_count();
    SSLNet model = SSLNet::build(sc, ae, init);
    ck.pairing = Pairing::Pairwise;
    res.report = train_ssl(model, to_batch(ds, sp.train, Pairing::Pairwise), to_batch(ds, sp.validation, Pairing::Pairwise),
                           config.train);
    ck.model = model.to_json();
    test_batch = to_batch(ds, sp.test, Pairing::Pairwise);
    trained = std::move(model);
  }

  res.report.model = config.model_type;
  res.report.test_scores = sigmoid_scores(model_logits(*trained, test_batch));
  res.report.test_targets = test_batch.targets;
  res.report.test = evaluate_scores_lenient(res.report.test_scores, res.report.test_targets);
  res.report.extra["seed"] = config.seed;
  res.report.extra["input_hash"] = res.input_hash;
  res.report.extra["split"] = split_to_json(sp);
  res.report.extra["pairing"] = to_string(ck.pairing);
  if (res.diagnostics) res.report.extra["residual_diagnostics"] = diagnostics_to_json(*res.diagnostics);

  if (!config.output_dir.empty()) {
    detail::write_output_dir(config.output_dir, [&](const std::filesystem::path& dir) {
      nlohmann::json run{{"config", experiment_config_to_json(config)},
                         {"seed", config.seed},
                         {"input_hash", res.input_hash}};
      write_json_file(dir / "config.json", run);
      write_json_file(dir / "checkpoint.json", checkpoint_to_json(ck));
      write_json_file(dir / "report.json", report_to_json(res.report));
      write_json_file(dir / "metrics.json", metrics_to_json(*res.report.test));
      export_curves((dir / "curves.csv").string(), res.report);
      if (res.partworths) write_partworth_csv((dir / "partworths.csv").string(), effects_code(*res.partworths));
      if (res.diagnostics) {
        std::ofstream os(dir / "residual_diagnostics.csv");
        write_diagnostics_csv(os, *res.diagnostics);
        write_json_file(dir / "residual_diagnostics.json", diagnostics_to_json(*res.diagnostics));
      }
      if (res.pretrain_report) write_json_file(dir / "pretrain_report.json", report_to_json(*res.pretrain_report));
    });
  }
  return res;
}

inline ExperimentResult run_experiment(const nlohmann::json& config, const Dataset* preloaded = nullptr) {
  return run_experiment(experiment_config_from_json(config), preloaded);
}

// ---------------------------------------------------------------------------
// Autoencoder stage

struct PretrainConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string dataset_path;
  bool append_context = false;
  PretrainSpec spec;
  SplitConfig split;
};

inline PretrainConfig pretrain_config_from_json(const nlohmann::json& j) {
  try {
    detail::check_keys(j, {"name", "seed", "output_dir", "dataset", "split", "ae"}, "config");
    PretrainConfig c;
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    const auto ds = detail::section(j, "dataset");
    detail::check_keys(ds, {"path", "append_context"}, "dataset");
    c.dataset_path = ds.value("path", c.dataset_path);
    c.append_context = ds.value("append_context", c.append_context);
    bool seed_set = false;
    c.split = split_config_from_json(detail::section(j, "split"), c.split, seed_set);
    if (!seed_set) c.split.seed = c.seed;
    c.spec = pretrain_spec_from_json(detail::section(j, "ae"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pretrain config: ") + e.what());
  }
}

struct PretrainResult {
  AutoEncoder model;
  TrainReport report;
  Checkpoint checkpoint;
  std::string input_hash;
};

// Trains the AE/VAE on the items of the non-test records (same split rule as
// `train`), so a later SSL run on the same split never sees test items.
inline PretrainResult run_pretrain(const PretrainConfig& config, const Dataset* preloaded = nullptr) {
  ExperimentConfig view;
  view.dataset_path = config.dataset_path;
  view.append_context = config.append_context;
  const Dataset ds = detail::load_experiment_dataset(view, preloaded);
  const std::string hash = detail::dataset_fingerprint(view, ds, preloaded != nullptr);
  const DatasetSplit sp = split(ds, config.split);
  TrainReport report;
  AutoEncoder ae = pretrain_autoencoder(ds, detail::concat(sp.train, sp.validation), config.spec, config.seed, &report);
  report.extra["seed"] = config.seed;
  report.extra["input_hash"] = hash;
  report.extra["split"] = split_to_json(sp);

  Checkpoint ck;
  ck.kind = "ae";
  ck.schema = ds.schema;
  ck.option_count = ds.option_count();
  ck.split = config.split;
  ck.dataset_path = config.dataset_path;
  ck.model = ae.to_json();

  if (!config.output_dir.empty()) {
    detail::write_output_dir(config.output_dir, [&](const std::filesystem::path& dir) {
      nlohmann::json cfg{{"seed", config.seed},
                         {"output_dir", config.output_dir},
                         {"dataset", {{"path", config.dataset_path}, {"append_context", config.append_context}}},
                         {"split", split_config_to_json(config.split)},
                         {"ae", pretrain_spec_to_json(config.spec)}};
      write_json_file(dir / "config.json", {{"config", cfg}, {"seed", config.seed}, {"input_hash", hash}});
      write_json_file(dir / "checkpoint.json", checkpoint_to_json(ck));
      write_json_file(dir / "report.json", report_to_json(report));
      export_curves((dir / "curves.csv").string(), report);
    });
  }
  return {std::move(ae), std::move(report), std::move(ck), hash};
}

}  // namespace conjointnet
