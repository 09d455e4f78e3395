#pragma once

// JSON serialization of metrics and training logs, and plain-text tables.

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tractfilter/ablation.hpp"
#include "tractfilter/ensemble.hpp"
#include "tractfilter/metrics.hpp"
#include "tractfilter/training.hpp"

namespace tractfilter::io {

using nlohmann::json;

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
inline std::optional<double> optional_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

inline json report_json(const MetricsReport& r) {
  json branches = json::object();
  for (int o = 0; o < kSupervisorCount; ++o) {
    const auto& b = r.branches[static_cast<std::size_t>(o)];
    branches[kSupervisorNames[static_cast<std::size_t>(o)]] = {
        {"loss", optional_json(b.loss)},           {"accuracy", b.accuracy},
        {"precision", optional_json(b.precision)}, {"recall", optional_json(b.recall)},
        {"confusion", b.confusion}};
  }
  json comp = json::object();
  for (int c = 0; c < CompositionClass::kCount; ++c) {
    const auto& m = r.composition[static_cast<std::size_t>(c)];
    comp[CompositionClass::from_index(c).code()] = {
        {"precision", optional_json(m.precision)}, {"recall", optional_json(m.recall)}, {"support", m.support}};
  }
  json tri = json::object();
  for (int c = 0; c < kTriClassCount; ++c) {
    const auto& m = r.triclass[static_cast<std::size_t>(c)];
    tri[kTriClassNames[static_cast<std::size_t>(c)]] = {
        {"precision", optional_json(m.precision)}, {"recall", optional_json(m.recall)}, {"support", m.support}};
  }
  return {{"count", r.count},
          {"accuracy_16", r.accuracy_16},
          {"accuracy_3", r.accuracy_3},
          {"mean_branch_accuracy", r.mean_branch_accuracy},
          {"branches", branches},
          {"composition", comp},
          {"triclass", tri},
          {"confusion_16", r.confusion_16},
          {"confusion_3", r.confusion_3}};
}

inline MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.count = j.at("count").get<std::uint64_t>();
  r.accuracy_16 = j.at("accuracy_16").get<double>();
  r.accuracy_3 = j.at("accuracy_3").get<double>();
  r.mean_branch_accuracy = j.at("mean_branch_accuracy").get<double>();
  for (int o = 0; o < kSupervisorCount; ++o) {
    const auto& b = j.at("branches").at(kSupervisorNames[static_cast<std::size_t>(o)]);
    auto& m = r.branches[static_cast<std::size_t>(o)];
    m.loss = optional_from(b.at("loss"));
    m.accuracy = b.at("accuracy").get<double>();
    m.precision = optional_from(b.at("precision"));
    m.recall = optional_from(b.at("recall"));
    m.confusion = b.at("confusion").get<Confusion2>();
  }
  for (int c = 0; c < CompositionClass::kCount; ++c) {
    const auto& m = j.at("composition").at(CompositionClass::from_index(c).code());
    r.composition[static_cast<std::size_t>(c)] = {optional_from(m.at("precision")), optional_from(m.at("recall")),
                                                  m.at("support").get<std::uint64_t>()};
  }
  for (int c = 0; c < kTriClassCount; ++c) {
    const auto& m = j.at("triclass").at(kTriClassNames[static_cast<std::size_t>(c)]);
    r.triclass[static_cast<std::size_t>(c)] = {optional_from(m.at("precision")), optional_from(m.at("recall")),
                                               m.at("support").get<std::uint64_t>()};
  }
  j.at("confusion_16").get_to(r.confusion_16);
  j.at("confusion_3").get_to(r.confusion_3);
  return r;
}

/// One line of the training log.
inline json epoch_json(const EpochRecord& e) {
  json loss = json::object(), acc = json::object();
  for (int o = 0; o < kSupervisorCount; ++o) {
    loss[kSupervisorNames[static_cast<std::size_t>(o)]] = e.train_loss[static_cast<std::size_t>(o)];
    acc[kSupervisorNames[static_cast<std::size_t>(o)]] = e.train_accuracy[static_cast<std::size_t>(o)];
  }
  json val_loss = json::object(), val_acc = json::object();
  for (int o = 0; o < kSupervisorCount; ++o) {
    const auto& b = e.validation.branches[static_cast<std::size_t>(o)];
    val_loss[kSupervisorNames[static_cast<std::size_t>(o)]] = optional_json(b.loss);
    val_acc[kSupervisorNames[static_cast<std::size_t>(o)]] = b.accuracy;
  }
  return {{"epoch", e.epoch},
          {"train_loss", loss},
          {"train_accuracy", acc},
          {"val_loss", val_loss},
          {"val_accuracy", val_acc},
          {"val_accuracy_16", e.validation.accuracy_16},
          {"val_accuracy_3", e.validation.accuracy_3}};
}

inline json distribution_json(const ClassDistribution& d) {
  json comp = json::object();
  for (int c = 0; c < CompositionClass::kCount; ++c) {
    const auto cls = CompositionClass::from_index(c);
    comp[cls.code()] = {{"count", d.composition[static_cast<std::size_t>(c)]},
                        {"triclass", to_string(map_to_triclass(cls))},
                        {"borderline", is_borderline(cls)}};
  }
  json tri = json::object();
  for (int c = 0; c < kTriClassCount; ++c) tri[kTriClassNames[static_cast<std::size_t>(c)]] = d.triclass[static_cast<std::size_t>(c)];
  return {{"total", d.total}, {"composition", comp}, {"triclass", tri}};
}

inline json ablation_json(std::span<const AblationRun> runs) {
  json out = {{"runs", json::array()}, {"summary", json::array()}};
  for (const auto& r : runs)
    out["runs"].push_back({{"configuration", r.configuration.name},
                           {"substitute", selection_string(r.configuration.substitute)},
                           {"realization", r.realization},
                           {"test", report_json(r.test)}});
  for (const auto& s : summarize_ablation(runs))
    out["summary"].push_back({{"configuration", s.configuration.name},
                              {"accuracy_3", {{"mean", s.accuracy_3.mean}, {"std", s.accuracy_3.stddev}}},
                              {"accuracy_16", {{"mean", s.accuracy_16.mean}, {"std", s.accuracy_16.stddev}}},
                              {"mean_branch_accuracy",
                               {{"mean", s.mean_branch_accuracy.mean}, {"std", s.mean_branch_accuracy.stddev}}}});
  return out;
}

inline std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

/// Human-readable summary of a metrics report.
inline std::string report_table(const MetricsReport& r) {
  std::ostringstream out;
  out << "samples        " << r.count << "\n"
      << "accuracy (16)  " << fmt(r.accuracy_16) << "\n"
      << "accuracy (3)   " << fmt(r.accuracy_3) << "\n"
      << "mean branch    " << fmt(r.mean_branch_accuracy) << "\n\n"
      << "branch  loss    accuracy  precision  recall\n";
  for (int o = 0; o < kSupervisorCount; ++o) {
    const auto& b = r.branches[static_cast<std::size_t>(o)];
    char line[128];
    std::snprintf(line, sizeof line, "%-6s  %-6s  %-8s  %-9s  %s\n", kSupervisorNames[static_cast<std::size_t>(o)],
                  fmt(b.loss).c_str(), fmt(b.accuracy).c_str(), fmt(b.precision).c_str(), fmt(b.recall).c_str());
    out << line;
  }
  out << "\nclass  precision  recall  support\n";
  for (int c = 0; c < kTriClassCount; ++c) {
    const auto& m = r.triclass[static_cast<std::size_t>(c)];
    char line[128];
    std::snprintf(line, sizeof line, "%-5s  %-9s  %-6s  %llu\n", kTriClassNames[static_cast<std::size_t>(c)],
                  fmt(m.precision).c_str(), fmt(m.recall).c_str(), static_cast<unsigned long long>(m.support));
    out << line;
  }
  out << "\ncomposition  precision  recall  support\n";
  for (int c = 0; c < CompositionClass::kCount; ++c) {
    const auto& m = r.composition[static_cast<std::size_t>(c)];
    if (m.support == 0 && !m.precision) continue;
    char line[128];
    std::snprintf(line, sizeof line, "%-11s  %-9s  %-6s  %llu\n", CompositionClass::from_index(c).code().c_str(),
                  fmt(m.precision).c_str(), fmt(m.recall).c_str(), static_cast<unsigned long long>(m.support));
    out << line;
  }
  return out.str();
}

/// Plot-ready CSV: one row per (group, name) with accuracy/precision/recall.
inline std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "group,name,accuracy,precision,recall,support\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(v) : std::string(); };
  for (int o = 0; o < kSupervisorCount; ++o) {
    const auto& b = r.branches[static_cast<std::size_t>(o)];
    out << "branch," << kSupervisorNames[static_cast<std::size_t>(o)] << ',' << fmt(b.accuracy) << ','
        << opt(b.precision) << ',' << opt(b.recall) << ',' << b.confusion[1][0] + b.confusion[1][1] << '\n';
  }
  for (int c = 0; c < kTriClassCount; ++c) {
    const auto& m = r.triclass[static_cast<std::size_t>(c)];
    out << "triclass," << kTriClassNames[static_cast<std::size_t>(c)] << ",," << opt(m.precision) << ','
        << opt(m.recall) << ',' << m.support << '\n';
  }
  for (int c = 0; c < CompositionClass::kCount; ++c) {
    const auto& m = r.composition[static_cast<std::size_t>(c)];
    out << "composition," << CompositionClass::from_index(c).code() << ",," << opt(m.precision) << ','
        << opt(m.recall) << ',' << m.support << '\n';
  }
  out << "aggregate,accuracy_16," << fmt(r.accuracy_16) << ",,,\n"
      << "aggregate,accuracy_3," << fmt(r.accuracy_3) << ",,,\n";
  return out.str();
}

}  // namespace tractfilter::io
