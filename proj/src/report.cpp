#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "essc/pipeline.hpp"

namespace essc::pipeline {

namespace {

using nlohmann::ordered_json;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ordered_json confusion_json(const Confusion& c) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : c) rows.push_back(r);
  return rows;
}

ordered_json per_stage_json(const std::array<double, kNumStages>& acc) {
  ordered_json j = ordered_json::object();
  for (auto s : kAllStages) j[std::string(stage_name(s))] = acc[stage_index(s)];
  return j;
}

ordered_json metrics_json(const MetricsReport& m, const ReportOptions& opt) {
  ordered_json j;
  j["total"] = m.total();
  j["confusion"] = confusion_json(m.confusion);
  j["per_stage_accuracy"] = per_stage_json(m.per_stage_accuracy);
  j["overall_accuracy"] = m.overall_accuracy;
  j["macro_f1"] = m.macro_f1;
  j["cohen_kappa"] = m.cohen_kappa;
  if (opt.include_timing) j["processing_time_s"] = m.processing_time_s;
  return j;
}

ordered_json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std_dev", s.std_dev}}; }

std::string metrics_header(const ReportOptions& opt) {
  std::string h = "overall_accuracy,macro_f1,cohen_kappa";
  for (auto s : kAllStages) h += ",acc_" + std::string(stage_name(s));
  if (opt.include_timing) h += ",processing_time_s";
  return h;
}

std::string metrics_row(const MetricsReport& m, const ReportOptions& opt) {
  std::string r = num(m.overall_accuracy) + "," + num(m.macro_f1) + "," + num(m.cohen_kappa);
  for (double a : m.per_stage_accuracy) r += "," + num(a);
  if (opt.include_timing) r += "," + num(m.processing_time_s);
  return r;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& m, const ReportOptions& opt) {
  return metrics_json(m, opt).dump(2) + "\n";
}

std::string metrics_to_csv(const MetricsReport& m, const ReportOptions& opt) {
  return metrics_header(opt) + "\n" + metrics_row(m, opt) + "\n";
}

std::string experiment_to_json(const ExperimentReport& r, const ReportOptions& opt) {
  ordered_json j;
  j["mode"] = r.mode;
  j["folds"] = ordered_json::array();
  for (const auto& f : r.folds) {
    ordered_json fj;
    fj["fold"] = f.fold;
    fj["train_size"] = f.train_size;
    fj["test_size"] = f.test_size;
    fj["metrics"] = metrics_json(f.metrics, opt);
    fj["history"] = {{"loss", f.history.loss}, {"accuracy", f.history.accuracy}};
    j["folds"].push_back(std::move(fj));
  }
  const auto& a = r.aggregate;
  ordered_json aj;
  aj["overall_accuracy"] = summary_json(a.overall_accuracy);
  aj["macro_f1"] = summary_json(a.macro_f1);
  aj["cohen_kappa"] = summary_json(a.cohen_kappa);
  ordered_json ps = ordered_json::object();
  for (auto s : kAllStages) ps[std::string(stage_name(s))] = summary_json(a.per_stage_accuracy[stage_index(s)]);
  aj["per_stage_accuracy"] = ps;
  aj["confusion"] = confusion_json(a.confusion);
  if (opt.include_timing) aj["processing_time_s"] = summary_json(a.processing_time_s);
  j["aggregate"] = std::move(aj);
  if (opt.include_timing) j["total_time_s"] = r.total_time_s;
  return j.dump(2) + "\n";
}

std::string experiment_to_csv(const ExperimentReport& r, const ReportOptions& opt) {
  std::string out = "fold,train_size,test_size," + metrics_header(opt) + "\n";
  for (const auto& f : r.folds) {
    out += std::to_string(f.fold) + "," + std::to_string(f.train_size) + "," + std::to_string(f.test_size) + "," +
           metrics_row(f.metrics, opt) + "\n";
  }
  const auto& a = r.aggregate;
  auto row = [&](const char* name, auto pick) {
    std::string line = std::string(name) + ",,," + num(pick(a.overall_accuracy)) + "," + num(pick(a.macro_f1)) +
                       "," + num(pick(a.cohen_kappa));
    for (const auto& s : a.per_stage_accuracy) line += "," + num(pick(s));
    if (opt.include_timing) line += "," + num(pick(a.processing_time_s));
    return line + "\n";
  };
  out += row("mean", [](const Summary& s) { return s.mean; });
  out += row("std", [](const Summary& s) { return s.std_dev; });
  return out;
}

std::string history_to_csv(const History& h) {
  std::string out = "epoch,loss,accuracy\n";
  for (std::size_t i = 0; i < h.loss.size(); ++i) {
    out += std::to_string(i + 1) + "," + num(h.loss[i]) + "," + num(h.accuracy[i]) + "\n";
  }
  return out;
}

std::string history_to_tsv(const History& h) {
  std::string out = "# epoch\tloss\taccuracy\n";
  for (std::size_t i = 0; i < h.loss.size(); ++i) {
    out += std::to_string(i + 1) + "\t" + num(h.loss[i]) + "\t" + num(h.accuracy[i]) + "\n";
  }
  return out;
}

std::string per_stage_to_tsv(const MetricsReport& m) {
  std::string out = "# stage\taccuracy\n";
  for (auto s : kAllStages) out += std::string(stage_name(s)) + "\t" + num(m.per_stage_accuracy[stage_index(s)]) + "\n";
  return out;
}

std::string predictions_to_csv(std::span<const Prediction> preds) {
  std::string out = "epoch,stage";
  for (auto s : kAllStages) out += ",p_" + std::string(stage_name(s));
  out += "\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out += std::to_string(i) + "," + std::string(stage_name(preds[i].stage));
    for (double p : preds[i].probabilities) out += "," + num(p);
    out += "\n";
  }
  return out;
}

}  // namespace essc::pipeline
