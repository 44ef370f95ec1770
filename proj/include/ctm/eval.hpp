#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctm/constraints.hpp"
#include "ctm/error.hpp"
#include "ctm/topic_space.hpp"

namespace ctm {

/// Mean of precision@k over the ranks k of positive items, ranking by score descending and then
/// original index ascending. Returns nullopt when there is no positive label.
inline std::optional<double> average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("average_precision: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double median_aps(const std::vector<double>& per_topic_ap) { return median(per_topic_ap); }

/// Number of (document, topic) entries strictly above `threshold`.
inline std::size_t chatter_count(std::span<const LabelVector> predictions, double threshold) {
  std::size_t n = 0;
  for (const auto& row : predictions) n += std::count_if(row.begin(), row.end(), [threshold](double p) { return p > threshold; });
  return n;
}

struct ViolationCounts {
  std::size_t inclusion = 0;
  std::size_t exclusion = 0;

  std::size_t total() const { return inclusion + exclusion; }
  bool operator==(const ViolationCounts&) const = default;
};

/// Inclusion: child above threshold while parent is not. Exclusion: both above threshold.
inline ViolationCounts violation_count(std::span<const LabelVector> predictions, const ConstraintSet& constraints,
                                       double threshold) {
  ViolationCounts out;
  for (const auto& p : predictions) {
    constraints.validate(p.size());
    for (const auto& c : constraints.all()) {
      if (c.kind == ConstraintKind::kInclusion) {
        out.inclusion += p[c.second] > threshold && p[c.first] <= threshold;
      } else if (c.kind == ConstraintKind::kExclusion) {
        out.exclusion += p[c.first] > threshold && p[c.second] > threshold;
      }
    }
  }
  return out;
}

/// Per-topic AP over a labelled set; topics without positives are left out.
inline std::map<std::string, double> per_topic_average_precision(std::span<const LabelVector> predictions,
                                                                 std::span<const LabelVector> gold,
                                                                 const TopicSpace& space) {
  if (predictions.size() != gold.size()) throw DataError("per-topic AP: prediction and gold counts differ");
  std::map<std::string, double> out;
  std::vector<double> scores(predictions.size());
  std::vector<int> labels(predictions.size());
  for (std::size_t t = 0; t < space.size(); ++t) {
    for (std::size_t d = 0; d < predictions.size(); ++d) {
      if (predictions[d].size() != space.size() || gold[d].size() != space.size()) {
        throw DataError("per-topic AP: vector length does not match the topic space");
      }
      scores[d] = predictions[d][t];
      labels[d] = gold[d][t] != 0.0;
    }
    if (auto ap = average_precision(scores, labels)) out[space.name(t)] = *ap;
  }
  return out;
}

struct EvalReport {
  std::map<std::string, double> per_topic_ap;
  std::optional<double> median_aps;
  std::size_t labelled_documents = 0;
  std::size_t chatter_documents = 0;
  std::size_t chatter_count = 0;
  double threshold = 0.9;
  ViolationCounts violations;
};

/// Evaluates predictions on a labelled set and/or a chatter set. Violations are counted over both.
inline EvalReport evaluate(const TopicSpace& space, std::span<const LabelVector> labelled_predictions,
                           std::span<const LabelVector> gold, std::span<const LabelVector> chatter_predictions,
                           const ConstraintSet& constraints, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("evaluate: threshold must lie in (0, 1)");
  EvalReport report;
  report.threshold = threshold;
  report.labelled_documents = labelled_predictions.size();
  report.chatter_documents = chatter_predictions.size();
  if (!labelled_predictions.empty()) {
    report.per_topic_ap = per_topic_average_precision(labelled_predictions, gold, space);
    if (report.per_topic_ap.empty()) throw DataError("evaluate: no topic has a positive gold label");
    std::vector<double> aps;
    for (const auto& [name, ap] : report.per_topic_ap) aps.push_back(ap);
    report.median_aps = median_aps(aps);
  }
  report.chatter_count = chatter_count(chatter_predictions, threshold);
  const auto a = violation_count(labelled_predictions, constraints, threshold);
  const auto b = violation_count(chatter_predictions, constraints, threshold);
  report.violations = {a.inclusion + b.inclusion, a.exclusion + b.exclusion};
  return report;
}

/// Topics appear in topic-space order.
inline nlohmann::ordered_json to_json(const EvalReport& r, const TopicSpace& space) {
  nlohmann::ordered_json j;
  if (r.median_aps) {
    j["median_aps"] = *r.median_aps;
  } else {
    j["median_aps"] = nullptr;
  }
  j["evaluated_topics"] = r.per_topic_ap.size();
  j["labelled_documents"] = r.labelled_documents;
  j["chatter_documents"] = r.chatter_documents;
  j["threshold"] = r.threshold;
  j["chatter_count"] = r.chatter_count;
  j["violations"] = {{"inclusion", r.violations.inclusion}, {"exclusion", r.violations.exclusion}};
  auto per_topic = nlohmann::ordered_json::object();
  for (const auto& name : space.names()) {
    if (auto it = r.per_topic_ap.find(name); it != r.per_topic_ap.end()) per_topic[name] = it->second;
  }
  j["per_topic_ap"] = std::move(per_topic);
  return j;
}

/// Tab-separated `topic<TAB>ap` rows in topic-space order.
inline void write_ap_table(std::ostream& out, const EvalReport& r, const TopicSpace& space) {
  out << "topic\tap\n";
  for (const auto& name : space.names()) {
    if (auto it = r.per_topic_ap.find(name); it != r.per_topic_ap.end()) {
      out << name << '\t' << nlohmann::json(it->second).dump() << '\n';
    }
  }
}

}  // namespace ctm
