#pragma once

// Prediction records and corpus-level prediction: combined probabilities from
// the dual model, then constraint calibration.

#include <algorithm>
#include <exception>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ctm/classifier.hpp"
#include "ctm/constraints.hpp"
#include "ctm/corpus.hpp"
#include "ctm/error.hpp"

namespace ctm {

struct PredictionRecord {
  std::string id;
  LabelVector combined;    // sigmoid(content + author logits)
  LabelVector calibrated;  // after the constraint model; equal to combined when it is off
  bool converged = true;
};

struct PredictOptions {
  const ConstraintSet* constraints = nullptr;  // nullptr disables calibration
  BPConfig bp;
  unsigned threads = 1;
};

inline PredictionRecord predict_document(const LinearDualModel& model, const Document& doc,
                                         const PredictOptions& options) {
  PredictionRecord rec;
  rec.id = doc.id;
  rec.combined = predict_probabilities(model, doc);
  if (options.constraints && !options.constraints->empty()) {
    auto cal = calibrate(rec.combined, *options.constraints, options.bp);
    rec.calibrated = std::move(cal.probabilities);
    rec.converged = cal.converged;
  } else {
    rec.calibrated = rec.combined;
  }
  return rec;
}

/// One record per document in corpus order. Documents are split into contiguous blocks across
/// `threads` workers; results do not depend on the thread count.
inline std::vector<PredictionRecord> predict_corpus(const LinearDualModel& model, const Corpus& corpus,
                                                    const PredictOptions& options = {}) {
  if (options.constraints) options.constraints->validate(model.space.size());
  options.bp.validate();
  std::vector<PredictionRecord> out(corpus.size());
  const std::size_t n = corpus.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(options.threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = predict_document(model, corpus.documents[i], options);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) {
          out[i] = predict_document(model, corpus.documents[i], options);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const PredictionRecord& rec) {
  nlohmann::ordered_json j;
  j["id"] = rec.id;
  j["combined"] = rec.combined;
  j["calibrated"] = rec.calibrated;
  j["converged"] = rec.converged;
  return j;
}

inline void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records) {
  for (const auto& rec : records) out << to_json(rec).dump() << '\n';
}

inline void save_predictions(const std::string& path, const std::vector<PredictionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write predictions file: " + path);
  write_predictions(out, records);
}

inline std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file: " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.combined = j.at("combined").get<LabelVector>();
      rec.calibrated = j.at("calibrated").get<LabelVector>();
      rec.converged = j.value("converged", true);
      if (rec.combined.size() != rec.calibrated.size()) throw DataError("combined/calibrated length mismatch");
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ctm
