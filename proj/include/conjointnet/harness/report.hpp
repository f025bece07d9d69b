#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "conjointnet/harness/metrics.hpp"
#include "conjointnet/training.hpp"

namespace conjointnet {

// Plot data: one row per epoch, test accuracy only on the checkpoint row.
inline void export_curves(std::ostream& os, const TrainReport& report) {
  os << "epoch,train_loss,train_acc,val_acc,test_acc,checkpoint\n" << std::setprecision(17);
  auto num = [&](double v) {
    if (std::isfinite(v)) os << v;
  };
  for (const auto& e : report.history) {
    const bool mark = e.epoch == report.best_epoch;
    os << e.epoch << ',';
    num(e.train_loss);
    os << ',';
    num(e.train_accuracy);
    os << ',';
    num(e.val_accuracy);
    os << ',';
    if (mark && report.test) num(report.test->accuracy);
    os << ',' << (mark ? 1 : 0) << '\n';
  }
}

inline void export_curves(const std::string& path, const TrainReport& report) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write '" + path + "'");
  export_curves(os, report);
}

struct CompareRow {
  std::string model_type;
  MetricSet metrics;
};

inline std::string display_model_name(const std::string& model) {
  if (model == "conjoint") return "Conjoint";
  if (model == "ssl") return "SSL ConjointNet";
  if (model == "residual") return "Residual ConjointNet";
  return model;
}

// Rows keep the order given; the CSV has exactly ModelType, Accuracy, AUC.
inline void compare_table_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "ModelType,Accuracy,AUC\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.model_type << ',' << r.metrics.accuracy << ',';
    if (std::isfinite(r.metrics.auc)) os << r.metrics.auc;
    os << '\n';
  }
}

// Fixed-width table; with two or more rows, deltas are relative to the first.
inline void compare_table_text(std::ostream& os, const std::vector<CompareRow>& rows) {
  std::size_t width = std::string("ModelType").size();
  for (const auto& r : rows) width = std::max(width, r.model_type.size());
  auto cell = [](double v) {
    std::ostringstream s;
    if (std::isfinite(v))
      s << std::fixed << std::setprecision(3) << v;
    else
      s << "n/a";
    return s.str();
  };
  auto delta = [](double v, double base) {
    std::ostringstream s;
    if (std::isfinite(v) && std::isfinite(base))
      s << std::showpos << std::fixed << std::setprecision(3) << (v - base);
    else
      s << "n/a";
    return s.str();
  };
  const bool deltas = rows.size() >= 2;
  os << std::left << std::setw(static_cast<int>(width)) << "ModelType" << "  " << std::setw(8) << "Accuracy" << "  "
     << std::setw(8) << "AUC";
  if (deltas) os << "  " << std::setw(8) << "dAcc" << "  " << "dAUC";
  os << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.model_type << "  " << std::setw(8)
       << cell(r.metrics.accuracy) << "  " << std::setw(8) << cell(r.metrics.auc);
    if (deltas)
      os << "  " << std::setw(8) << delta(r.metrics.accuracy, rows.front().metrics.accuracy) << "  "
         << delta(r.metrics.auc, rows.front().metrics.auc);
    os << '\n';
  }
}

inline CompareRow compare_row_from_report(const nlohmann::json& report) {
  if (!report.contains("test")) throw DataError("report has no test metrics");
  return {display_model_name(report.value("model", std::string("unknown"))), metrics_from_json(report.at("test"))};
}

inline std::vector<CompareRow> load_compare_rows(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ValidationError("compare needs at least one report");
  std::vector<CompareRow> rows;
  for (const auto& p : paths) {
    std::filesystem::path file(p);
    if (std::filesystem::is_directory(file)) file /= "report.json";
    std::ifstream in(file);
    if (!in) throw DataError("cannot open report '" + file.string() + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("report '" + file.string() + "' is not valid JSON: " + e.what());
    }
    rows.push_back(compare_row_from_report(j));
  }
  return rows;
}

}  // namespace conjointnet
