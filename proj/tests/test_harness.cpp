#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "conjointnet/dataio/synth.hpp"
#include "conjointnet/harness/experiment.hpp"

using namespace conjointnet;
namespace fs = std::filesystem;

namespace {

double brute_force_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double credit = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        credit += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return credit / pairs;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("conjointnet_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json base_config(const std::string& model, std::uint64_t seed = 5) {
  return {{"seed", seed}, {"model", {{"type", model}}}, {"train", {{"max_epochs", 20}, {"learning_rate", 1e-2}}}};
}

}  // namespace

TEST(Accuracy, Examples) {
  const std::vector<int> t{1, 0, 1, 1, 0, 0, 1, 0, 1, 0};
  EXPECT_EQ(accuracy(t, t), 1.0);
  std::vector<int> flipped;
  for (int v : t) flipped.push_back(1 - v);
  EXPECT_EQ(accuracy(flipped, t), 0.0);
  std::vector<int> seven = t;
  for (std::size_t i : {0u, 4u, 9u}) seven[i] = 1 - seven[i];
  EXPECT_DOUBLE_EQ(accuracy(seven, t), 0.7);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), ValidationError);
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 0}), ValidationError);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{0, 0, 1, 1}), 0.0);
  EXPECT_EQ(auc(std::vector<double>(6, 0.3), std::vector<int>{0, 1, 0, 1, 1, 0}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
  EXPECT_TRUE(std::isnan(evaluate_scores_lenient(std::vector<double>{0.1, 0.7}, std::vector<int>{0, 0}).auc));
}

TEST(Auc, MatchesBruteForceWithHeavyTies) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 200;
    const int distinct = 1 + static_cast<int>(rng() % 6);  // few values -> many ties
    std::uniform_int_distribution<int> level(0, distinct - 1);
    std::bernoulli_distribution coin(0.4);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 2 ? level(rng) / 7.0 : std::uniform_real_distribution<double>()(rng);
      y[i] = coin(rng) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auc(s, y), brute_force_auc(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderIncreasingTransforms) {
  Rng rng(2);
  std::vector<double> s(300);
  std::vector<int> y(300);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::round(std::normal_distribution<double>()(rng) * 4.0) / 4.0;
    y[i] = coin(rng) ? 1 : 0;
  }
  std::vector<double> a, b;
  for (double v : s) {
    a.push_back(std::exp(v));
    b.push_back(3.0 * v * v * v + 1.0);
  }
  EXPECT_EQ(auc(a, y), auc(s, y));
  EXPECT_EQ(auc(b, y), auc(s, y));
}

TEST(Metrics, JsonKeepsUndefinedAucAsNull) {
  const MetricSet m{0.75, std::numeric_limits<double>::quiet_NaN(), 4};
  const auto j = metrics_to_json(m);
  EXPECT_TRUE(j.at("auc").is_null());
  const auto back = metrics_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.accuracy, 0.75);
  EXPECT_TRUE(std::isnan(back.auc));
  const MetricSet full{0.5, 0.625, 8};
  EXPECT_EQ(metrics_from_json(metrics_to_json(full)), full);
}

TEST(Compare, CsvHasDeclaredOrderAndColumns) {
  const std::vector<CompareRow> rows{{"Residual ConjointNet", {0.9, 0.95, 10}}, {"Conjoint", {0.5, 0.5, 10}}};
  std::ostringstream csv;
  compare_table_csv(csv, rows);
  EXPECT_EQ(csv.str(), "ModelType,Accuracy,AUC\nResidual ConjointNet,0.90000000000000002,0.94999999999999996\n"
                       "Conjoint,0.5,0.5\n");
  std::ostringstream text;
  compare_table_text(text, rows);
  EXPECT_NE(text.str().find("dAcc"), std::string::npos);
  EXPECT_NE(text.str().find("-0.400"), std::string::npos);
  const std::string table = text.str();
  EXPECT_LT(table.find("Residual"), table.rfind("\nConjoint"));
}

TEST(Compare, SingleReportHasNoDeltas) {
  std::ostringstream text;
  compare_table_text(text, {{"Conjoint", {0.7, 0.8, 3}}});
  const std::string table = text.str();
  EXPECT_EQ(table.find("dAcc"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 2);
}

TEST(Curves, OneRowPerEpochAndOneMarker) {
  TrainReport r;
  for (std::size_t e = 1; e <= 100; ++e) r.history.push_back({e, 1.0 / e, 0.5, 0.6, std::nan("")});
  r.best_epoch = 37;
  r.test = MetricSet{0.8, 0.9, 10};
  std::ostringstream os;
  export_curves(os, r);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,train_loss,train_acc,val_acc,test_acc,checkpoint");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 101);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  int marks = 0;
  while (std::getline(in, line)) {
    if (line.back() == '1') {
      ++marks;
      EXPECT_EQ(line.substr(0, 3), "37,");
      EXPECT_NE(line.find(",0.80000000000000004,"), std::string::npos);
    }
  }
  EXPECT_EQ(marks, 1);
}

TEST(Config, OverridesAndUnknownKeys) {
  nlohmann::json c = base_config("residual");
  apply_override(c, "train.max_epochs", "7");
  apply_override(c, "model.residual.hidden_nodes", "64");
  apply_override(c, "name", "run-a");
  const auto parsed = experiment_config_from_json(c);
  EXPECT_EQ(parsed.train.max_epochs, 7u);
  EXPECT_EQ(parsed.residual.hidden_nodes, 64u);
  EXPECT_EQ(parsed.name, "run-a");
  EXPECT_EQ(parsed.split.seed, 5u);
  nlohmann::json bad = base_config("residual");
  bad["train"]["epochs"] = 3;
  EXPECT_THROW(experiment_config_from_json(bad), ValidationError);
  nlohmann::json over = base_config("conjoint");
  over["train"]["max_epochs"] = 101;
  EXPECT_THROW(experiment_config_from_json(over), ValidationError);
  EXPECT_THROW(experiment_config_from_json(base_config("svm")), ValidationError);
  EXPECT_THROW(experiment_config_from_json(base_config("ssl")), ValidationError);  // no encoder source
  EXPECT_THROW(apply_override(c, "a..b", "1"), ValidationError);
  // The resolved config parses back to itself.
  const auto again = experiment_config_from_json(experiment_config_to_json(parsed));
  EXPECT_EQ(experiment_config_to_json(again).dump(), experiment_config_to_json(parsed).dump());
}

TEST(OutputDir, FailureLeavesNothingBehind) {
  const auto dir = scratch("partial");
  const auto target = dir / "run";
  EXPECT_THROW(detail::write_output_dir(target.string(),
                                        [](const fs::path& d) {
                                          std::ofstream(d / "half.json") << "{}";
                                          throw NumericError("boom");
                                        }),
               NumericError);
  EXPECT_TRUE(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST(RunExperiment, RepeatRunsAreBitIdentical) {
  const auto s = uniform_schema(4, 3);
  Rng rng(3);
  const auto data = synth_linear(random_partworths(s, rng), 1500, 4);
  const auto dir = scratch("determinism");
  save_dataset(data.dataset, (dir / "data.json").string());
  for (const std::string model : {"conjoint", "residual", "ssl"}) {
    nlohmann::json c = base_config(model);
    c["dataset"] = {{"path", (dir / "data.json").string()}};
    c["train"]["max_epochs"] = 5;
    if (model == "ssl") c["model"]["ssl"] = {{"pretrain", {{"hidden_dims", {16}}, {"latent_dim", 3}, {"max_epochs", 3}}}};
    c["output_dir"] = (dir / (model + "_a")).string();
    run_experiment(c);
    c["output_dir"] = (dir / (model + "_b")).string();
    run_experiment(c);
    for (const char* f : {"checkpoint.json", "metrics.json", "report.json"})
      EXPECT_EQ(slurp(dir / (model + "_a") / f), slurp(dir / (model + "_b") / f)) << model << " " << f;
  }
  fs::remove_all(dir);
}

TEST(RunExperiment, OutputDirectoryRecordsConfigSeedAndHash) {
  const auto s = uniform_schema(3, 3);
  Rng rng(4);
  const auto data = synth_linear(random_partworths(s, rng), 600, 5);
  const auto dir = scratch("outputs");
  const auto path = (dir / "data.json").string();
  save_dataset(data.dataset, path);
  nlohmann::json c = base_config("residual", 11);
  c["dataset"] = {{"path", path}};
  c["train"]["max_epochs"] = 4;
  c["output_dir"] = (dir / "run").string();
  const auto res = run_experiment(c);
  for (const char* f : {"config.json", "checkpoint.json", "report.json", "metrics.json", "curves.csv", "partworths.csv",
                        "residual_diagnostics.csv"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const auto run = nlohmann::json::parse(slurp(dir / "run" / "config.json"));
  EXPECT_EQ(run.at("seed"), 11);
  EXPECT_EQ(run.at("input_hash"), file_hash(path));
  EXPECT_EQ(run.at("config").at("train").at("max_epochs"), 4);
  EXPECT_EQ(run.at("config").at("model").at("residual").at("hidden_nodes"), 16);
  // The resolved config reproduces the run.
  nlohmann::json replay = run.at("config");
  replay["output_dir"] = "";
  EXPECT_EQ(*run_experiment(replay).report.test, *res.report.test);
  // Stored scores recover the accuracy.
  const auto report = nlohmann::json::parse(slurp(dir / "run" / "report.json"));
  const auto scores = report.at("test_scores").get<std::vector<double>>();
  const auto targets = report.at("test_targets").get<std::vector<int>>();
  EXPECT_EQ(accuracy(threshold_labels(scores), targets), res.report.test->accuracy);
  // So does reloading the checkpoint.
  const auto ck = load_checkpoint((dir / "run").string());
  EXPECT_EQ(evaluate_checkpoint(ck, load_dataset(path), "test"), *res.report.test);
  EXPECT_EQ(report.at("best_epoch"), res.report.best_epoch);
  fs::remove_all(dir);
}

TEST(RunExperiment, ResidualBeatsConjointOnXor) {
  const auto s = uniform_schema(6, 2);
  const auto data = synth_interaction(s, InteractionKind::XOR, 4000, 0.05, 6);
  nlohmann::json c = base_config("conjoint");
  const double conj = run_experiment(c, &data.dataset).report.test->accuracy;
  c = base_config("residual");
  c["train"]["max_epochs"] = 60;
  const double res = run_experiment(c, &data.dataset).report.test->accuracy;
  EXPECT_GE(res - conj, 0.30) << "residual " << res << " conjoint " << conj;
}

TEST(RunExperiment, SslMatchesConjointOnLinearData) {
  const auto s = uniform_schema(4, 3);
  Rng rng(7);
  const auto data = synth_linear(random_partworths(s, rng), 3000, 8);
  const double conj = run_experiment(base_config("conjoint"), &data.dataset).report.test->accuracy;
  nlohmann::json c = base_config("ssl");
  c["train"]["max_epochs"] = 30;
  c["train"]["learning_rate"] = 3e-3;
  c["model"]["ssl"] = {{"encoder_mode", "finetune"},
                       {"pretrain", {{"hidden_dims", {16}}, {"latent_dim", 6}, {"max_epochs", 20}, {"learning_rate", 5e-3}}}};
  const double ssl = run_experiment(c, &data.dataset).report.test->accuracy;
  EXPECT_LE(std::abs(ssl - conj), 0.03) << "ssl " << ssl << " conjoint " << conj;
}

TEST(RunExperiment, BadInputsFailCleanly) {
  const auto s = uniform_schema(3, 2);
  const auto data = synth_interaction(s, InteractionKind::XOR, 100, 0.0, 1);
  nlohmann::json c = base_config("conjoint");
  c["model"]["pairing"] = "pairwise";
  EXPECT_THROW(run_experiment(c, &data.dataset), ValidationError);  // single-option records
  nlohmann::json missing = base_config("conjoint");
  missing["dataset"] = {{"path", "/nonexistent/data.json"}};
  EXPECT_THROW(run_experiment(missing), DataError);
}
