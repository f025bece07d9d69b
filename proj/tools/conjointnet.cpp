// Command line front end: preprocess, synth, train, pretrain-ae, eval,
// partworths, reconstruct, compare.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "conjointnet/conjointnet.hpp"

namespace cn = conjointnet;

namespace {

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

nlohmann::json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json cfg = cn::read_json_file(path, "config");
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cn::ValidationError("--set expects key=value, got '" + kv + "'");
    cn::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string exp2_path(const std::string& out) {
  const std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + ".exp2" + p.extension().string())).string();
}

cn::Dataset dataset_for_checkpoint(const cn::Checkpoint& ck, const std::string& override_path) {
  const std::string path = override_path.empty() ? ck.dataset_path : override_path;
  if (path.empty()) throw cn::ValidationError("checkpoint records no dataset path; pass --dataset");
  return cn::load_dataset(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conjoint analysis and ConjointNet models for choice data"};
  app.require_subcommand(1);

  // preprocess ---------------------------------------------------------------
  auto* pre = app.add_subcommand("preprocess", "Convert raw survey exports into a dataset file");
  pre->require_subcommand(1);
  std::string mm_input, mm_out;
  std::size_t mm_limit = 0;
  auto* pre_mm = pre->add_subcommand("mm", "Moral Machine shared responses (pedestrian vs pedestrian)");
  pre_mm->add_option("--input", mm_input, "Raw delimited export")->required();
  pre_mm->add_option("--out", mm_out, "Dataset file to write")->required();
  pre_mm->add_option("--limit", mm_limit, "Keep at most N pairs (hash subsample by ResponseID)");

  std::string car_exp1, car_exp2, car_out;
  auto* pre_car = pre->add_subcommand("car", "Car Preference experiments");
  pre_car->add_option("--exp1", car_exp1, "Experiment 1 directory or prefs file")->required();
  pre_car->add_option("--exp2", car_exp2, "Experiment 2 directory or prefs file");
  pre_car->add_option("--out", car_out, "Dataset file for experiment 1 (experiment 2 goes to <stem>.exp2<ext>)")
      ->required();

  // synth --------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with a known rule");
  std::string synth_kind, synth_schema, synth_out;
  std::size_t synth_n = 10000;
  std::uint64_t synth_seed = 0;
  double synth_noise = 0.05;
  bool synth_pairs = false;
  synth->add_option("kind", synth_kind, "linear | xor | threshold")
      ->required()
      ->check(CLI::IsMember({"linear", "xor", "threshold"}));
  synth->add_option("--schema", synth_schema, "Schema JSON (attributes, optional partworths)")->required();
  synth->add_option("--n", synth_n, "Number of records")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->required();
  synth->add_option("--out", synth_out, "Dataset file to write")->required();
  synth->add_option("--noise", synth_noise, "Label flip probability for xor/threshold");
  synth->add_flag("--pairs", synth_pairs, "xor/threshold: emit preference pairs instead of single items");

  // train / pretrain-ae -----------------------------------------------------
  std::string train_config, train_out;
  std::vector<std::string> train_set;
  auto* train = app.add_subcommand("train", "Train conjoint, ssl or residual model from a JSON config");
  train->add_option("--config", train_config, "Experiment config JSON")->required();
  train->add_option("--set", train_set, "Override a config key: key.path=value")->take_all();
  train->add_option("--out", train_out, "Output directory (overrides output_dir)");

  std::string ae_config, ae_out;
  std::vector<std::string> ae_set;
  auto* pretrain = app.add_subcommand("pretrain-ae", "Pretrain the autoencoder / VAE stage");
  pretrain->add_option("--config", ae_config, "Pretraining config JSON")->required();
  pretrain->add_option("--set", ae_set, "Override a config key: key.path=value")->take_all();
  pretrain->add_option("--out", ae_out, "Output directory (overrides output_dir)");

  // eval / partworths / reconstruct / compare --------------------------------
  std::string eval_model, eval_dataset, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->add_option("--model", eval_model, "Checkpoint file or run directory")->required();
  eval->add_option("--dataset", eval_dataset, "Dataset file")->required();
  eval->add_option("--split", eval_split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "validation", "test", "all"}));

  std::string pw_model, pw_out, pw_method = "range";
  auto* pw = app.add_subcommand("partworths", "Export effects-coded partworths and attribute importance");
  pw->add_option("--model", pw_model, "Conjoint or residual checkpoint")->required();
  pw->add_option("--out", pw_out, "CSV file to write")->required();
  pw->add_option("--importance", pw_method, "range | levelsum")->check(CLI::IsMember({"range", "levelsum"}));

  std::string rc_model, rc_out, rc_dataset;
  std::size_t rc_sample = 0, rc_option = 0;
  auto* rc = app.add_subcommand("reconstruct", "Dump original vs reconstructed one-hot for one item");
  rc->add_option("--model", rc_model, "Autoencoder checkpoint")->required();
  rc->add_option("--sample", rc_sample, "Record index in the dataset")->required();
  rc->add_option("--out", rc_out, "CSV file to write")->required();
  rc->add_option("--dataset", rc_dataset, "Dataset file (default: the one recorded in the checkpoint)");
  rc->add_option("--option", rc_option, "Which option of the record");

  std::vector<std::string> cmp_reports;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "Model-by-metric comparison table");
  cmp->add_option("--reports", cmp_reports, "report.json files or run directories, in display order")
      ->required()
      ->take_all();
  cmp->add_option("--out", cmp_out, "CSV file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cn::kExitValidation;
  }

  try {
    if (*pre_mm) {
      cn::MMLoadOptions opt;
      if (mm_limit > 0) opt.limit = mm_limit;
      const cn::MMData data = cn::load_mm(mm_input, opt);
      if (data.pairs.empty()) throw cn::DataError("no valid pedestrian-vs-pedestrian pairs in input");
      const cn::Dataset ds = cn::mm_dataset(data);
      cn::save_dataset(ds, mm_out);
      print_json(ds.meta);
    } else if (*pre_car) {
      const cn::CarData data = cn::load_car(car_exp1, car_exp2);
      const cn::Dataset ds1 = cn::car_dataset(data.experiment1);
      cn::save_dataset(ds1, car_out);
      nlohmann::json summary{{"experiment1", ds1.meta}};
      if (data.experiment2) {
        const cn::Dataset ds2 = cn::car_dataset(*data.experiment2);
        cn::save_dataset(ds2, exp2_path(car_out));
        summary["experiment2"] = ds2.meta;
        summary["experiment2_path"] = exp2_path(car_out);
      }
      print_json(summary);
    } else if (*synth) {
      const nlohmann::json sj = cn::read_json_file(synth_schema, "schema");
      const cn::AttributeSchema schema = cn::schema_from_json(sj);
      cn::SynthResult res;
      if (synth_kind == "linear") {
        cn::PartworthTable w;
        if (sj.contains("partworths")) {
          w = cn::PartworthTable(schema, sj.at("partworths").get<std::vector<std::vector<double>>>());
        } else {
          cn::Rng rng(synth_seed ^ 0x5bd1e995ULL);
          w = cn::random_partworths(schema, rng);
        }
        res = cn::synth_linear(w, synth_n, synth_seed);
      } else {
        const auto kind = cn::interaction_kind_from_string(synth_kind);
        res = synth_pairs ? cn::synth_interaction_pairs(schema, kind, synth_n, synth_noise, synth_seed)
                          : cn::synth_interaction(schema, kind, synth_n, synth_noise, synth_seed);
      }
      cn::save_dataset(res.dataset, synth_out);
      print_json({{"records", res.dataset.size()}, {"bayes_accuracy", res.bayes_accuracy}});
    } else if (*train) {
      nlohmann::json cfg = load_config(train_config, train_set);
      if (!train_out.empty()) cfg["output_dir"] = train_out;
      const cn::ExperimentResult res = cn::run_experiment(cfg);
      print_json({{"model", res.report.model},
                  {"best_epoch", res.report.best_epoch},
                  {"test", cn::metrics_to_json(*res.report.test)},
                  {"output_dir", res.config.output_dir}});
    } else if (*pretrain) {
      nlohmann::json cfg = load_config(ae_config, ae_set);
      if (!ae_out.empty()) cfg["output_dir"] = ae_out;
      const cn::PretrainResult res = cn::run_pretrain(cn::pretrain_config_from_json(cfg));
      const auto& best = res.report.history.at(res.report.best_epoch - 1);
      print_json({{"model", res.report.model},
                  {"best_epoch", res.report.best_epoch},
                  {"val_loss", cn::number_or_null(best.val_loss)},
                  {"val_reconstruction_accuracy", cn::number_or_null(best.val_accuracy)}});
    } else if (*eval) {
      const cn::Checkpoint ck = cn::load_checkpoint(eval_model);
      const cn::Dataset ds = cn::load_dataset(eval_dataset);
      print_json(cn::metrics_to_json(cn::evaluate_checkpoint(ck, ds, eval_split)));
    } else if (*pw) {
      const cn::Checkpoint ck = cn::load_checkpoint(pw_model);
      cn::PartworthTable table;
      if (ck.kind == "conjoint") {
        table = cn::effects_code(cn::LinearConjoint::from_json(ck.model).partworths());
      } else if (ck.kind == "residual") {
        if (ck.encoding != cn::InputEncoding::OneHot)
          throw cn::ValidationError("partworths need a one-hot residual model");
        const auto net = cn::ResidualNet::from_json(ck.model);
        const cn::AttributeSchema s =
            ck.pairing == cn::Pairing::Pairwise ? ck.schema : cn::concat_schema(ck.schema, cn::option_prefixes(ck.option_count));
        table = net.extract_linear_partworths(s);
      } else {
        throw cn::ValidationError("checkpoint kind '" + ck.kind + "' has no partworths");
      }
      cn::write_partworth_csv(pw_out, table,
                              pw_method == "range" ? cn::ImportanceMethod::Range : cn::ImportanceMethod::LevelSum);
    } else if (*rc) {
      const cn::Checkpoint ck = cn::load_checkpoint(rc_model);
      if (ck.kind != "ae") throw cn::ValidationError("reconstruct needs an autoencoder checkpoint");
      const cn::AutoEncoder ae = cn::AutoEncoder::from_json(ck.model);
      const cn::Dataset ds = dataset_for_checkpoint(ck, rc_dataset);
      if (!(ds.schema == ck.schema)) throw cn::DataError("dataset schema does not match the checkpoint");
      if (rc_sample >= ds.size()) throw cn::ValidationError("--sample out of range (dataset has " + std::to_string(ds.size()) + " records)");
      const auto& rec = ds.records[rc_sample];
      if (rc_option >= rec.options.size()) throw cn::ValidationError("--option out of range");
      std::ofstream os(rc_out);
      if (!os) throw cn::DataError("cannot write '" + rc_out + "'");
      cn::write_reconstruction_csv(os, cn::reconstruction_dump(ae, ds.schema, rec.options[rc_option]));
    } else if (*cmp) {
      const auto rows = cn::load_compare_rows(cmp_reports);
      std::ofstream os(cmp_out);
      if (!os) throw cn::DataError("cannot write '" + cmp_out + "'");
      cn::compare_table_csv(os, rows);
      cn::compare_table_text(std::cout, rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cn::exit_code_for(e);
  }
  return cn::kExitOk;
}
