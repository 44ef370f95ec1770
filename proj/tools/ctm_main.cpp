// ctm: command-line front end for weak labeling, splitting, training,
// prediction with constraint calibration, and evaluation.
//
// Exit status: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctm/ctm.hpp"

namespace {

using namespace ctm;

struct BpFlags {
  BPConfig config;
  void add_to(CLI::App* cmd) {
    cmd->add_option("--bp-max-iters", config.max_iters, "Belief propagation iteration cap")->capture_default_str();
    cmd->add_option("--bp-tolerance", config.tolerance, "Convergence threshold on message change")->capture_default_str();
    cmd->add_option("--bp-damping", config.damping, "Message damping in [0, 1)")->capture_default_str();
    cmd->add_option("--bp-clamp", config.clamp, "Probability clamp before building unary factors")->capture_default_str();
    cmd->add_option("--exact-limit", config.exact_component_limit,
                    "Largest component solved by exact enumeration")->capture_default_str();
  }
};

struct ToggleFlags {
  bool no_links = false, no_media = false, no_entities = false, no_author = false;
  void add_to(CLI::App* cmd) {
    cmd->add_flag("--no-links", no_links, "Ignore hyperlink titles and descriptions");
    cmd->add_flag("--no-media", no_media, "Ignore media annotations");
    cmd->add_flag("--no-entities", no_entities, "Ignore entity descriptions");
    cmd->add_flag("--no-author", no_author, "Ignore author name and bio");
  }
  FeatureToggles toggles() const { return {!no_links, !no_media, !no_entities, !no_author}; }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void write_text(const std::string& path, const std::string& content) { open_out(path) << content; }

Corpus concat(const std::vector<std::string>& paths) {
  Corpus all;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    auto c = load_corpus(p);
    for (auto& d : c.documents) {
      if (!ids.insert(d.id).second) throw DataError(p + ": duplicate document id '" + d.id + "' across corpora");
      all.documents.push_back(std::move(d));
    }
    all.provenance += (all.provenance.empty() ? "" : "+") + p;
  }
  return all;
}

// ---------------------------------------------------------------------------

struct WeakLabelCmd {
  std::string topics, rules, corpus, topical_out, chatter_out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("weak-label", "Attach keyword-rule labels and separate chatter");
    cmd->add_option("--topics", topics, "Topic list file")->required();
    cmd->add_option("--rules", rules, "Keyword rules file")->required();
    cmd->add_option("--corpus", corpus, "Input corpus (JSON lines)")->required();
    cmd->add_option("--topical-out", topical_out, "Output for documents some rule fires on")->required();
    cmd->add_option("--chatter-out", chatter_out, "Output for documents no rule fires on")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const auto space = load_topics(topics);
    const auto rule_set = compile_rules(rules, space);
    const auto parts = partition_chatter(load_corpus(corpus), rule_set);
    save_corpus(topical_out, parts.topical);
    save_corpus(chatter_out, parts.chatter);
    std::cout << "topical " << parts.topical.size() << "  chatter " << parts.chatter.size() << '\n';
  }
};

struct SplitCmd {
  std::string corpus, out_prefix;
  std::vector<double> fractions{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("split", "Author-disjoint train/valid/test split");
    cmd->add_option("--corpus", corpus, "Input corpus")->required();
    cmd->add_option("--fractions", fractions, "Train, valid, test fractions")->expected(3)->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    cmd->add_option("--out-prefix", out_prefix, "Output prefix (default: the corpus path)");
    cmd->callback([this] { run(); });
  }

  void run() const {
    const auto split = split_user_disjoint(load_corpus(corpus), {fractions[0], fractions[1], fractions[2]}, seed);
    const auto prefix = out_prefix.empty() ? corpus : out_prefix;
    save_corpus(prefix + ".train", split.train);
    save_corpus(prefix + ".valid", split.valid);
    save_corpus(prefix + ".test", split.test);
    std::cout << "train " << split.train.size() << "  valid " << split.valid.size() << "  test "
              << split.test.size() << '\n';
  }
};

struct TrainCmd {
  std::string topics, labels = "gold", out, init;
  std::vector<std::string> corpora, chatter;
  TrainConfig config;
  ToggleFlags toggles;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("train", "Train the dual linear classifier");
    cmd->add_option("--topics", topics, "Topic list file")->required();
    cmd->add_option("--corpus", corpora, "Training corpora")->required();
    cmd->add_option("--chatter", chatter, "Chatter corpora trained with all-negative targets");
    cmd->add_option("--labels", labels, "Label source")->check(CLI::IsMember({"gold", "weak"}))->capture_default_str();
    cmd->add_option("--out", out, "Model file to write")->required();
    cmd->add_option("--init", init, "Start from this model (fine-tuning)");
    cmd->add_option("--epochs", config.epochs)->capture_default_str();
    cmd->add_option("--lr", config.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--dim", config.dim, "Hashed feature dimensionality")->capture_default_str();
    cmd->add_option("--max-class-weight", config.max_class_weight)->capture_default_str();
    cmd->add_option("--l2", config.l2, "L2 coefficient")->capture_default_str();
    cmd->add_option("--seed", config.seed)->capture_default_str();
    toggles.add_to(cmd);
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto space = load_topics(topics);
    const auto source = labels == "gold" ? LabelSource::kGold : LabelSource::kWeak;
    auto corpus = concat(corpora);
    if (!chatter.empty()) {
      std::set<std::string> ids;
      for (const auto& d : corpus.documents) ids.insert(d.id);
      for (auto& d : concat(chatter).documents) {
        if (!ids.insert(d.id).second) throw DataError("chatter document id '" + d.id + "' repeats a training id");
        (source == LabelSource::kGold ? d.gold_labels : d.weak_labels) = std::set<std::string>{};
        corpus.documents.push_back(std::move(d));
      }
    }
    config.toggles = toggles.toggles();
    std::optional<LinearDualModel> start;
    if (!init.empty()) start = load_model(init);
    const auto result = train(corpus, source, space, config, start ? &*start : nullptr);
    save_model(out, result.model);
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      std::cout << "epoch " << e + 1 << "  loss " << result.epoch_loss[e] << '\n';
    }
  }
};

struct PredictCmd {
  std::string model_path, corpus, out, constraints, topics;
  bool no_constraints = false;
  unsigned threads = 1;
  BpFlags bp;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("predict", "Write combined and calibrated probabilities per document");
    cmd->add_option("--model", model_path, "Model file")->required();
    cmd->add_option("--corpus", corpus, "Corpus to score")->required();
    cmd->add_option("--out", out, "Predictions file (JSON lines)")->required();
    cmd->add_option("--constraints", constraints, "Constraints file");
    cmd->add_option("--topics", topics, "Topic list the constraints were written against");
    cmd->add_flag("--no-constraints", no_constraints, "Skip calibration even if constraints are given");
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    bp.add_to(cmd);
    cmd->callback([this] { run(); });
  }

  void run() const {
    const auto model = load_model(model_path);
    if (!topics.empty() && !(load_topics(topics) == model.space)) {
      throw DataError("topic list " + topics + " does not match the model's topics");
    }
    std::optional<ConstraintSet> set;
    if (!constraints.empty() && !no_constraints) set = load_constraints(constraints, model.space);
    PredictOptions options;
    options.constraints = set ? &*set : nullptr;
    options.bp = bp.config;
    options.threads = threads;
    const auto records = predict_corpus(model, load_corpus(corpus), options);
    save_predictions(out, records);
    std::size_t unconverged = 0;
    for (const auto& r : records) unconverged += !r.converged;
    if (unconverged) std::cerr << "warning: belief propagation did not converge on " << unconverged << " documents\n";
    std::cout << "predicted " << records.size() << " documents\n";
  }
};

struct EvaluateCmd {
  std::string topics, predictions, gold, chatter_predictions, constraints, out, table, field = "calibrated";
  double threshold = 0.9;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "Median APS, chatter count and constraint violations");
    cmd->add_option("--topics", topics, "Topic list file")->required();
    cmd->add_option("--predictions", predictions, "Predictions for the labelled set");
    cmd->add_option("--gold", gold, "Corpus with gold_labels for the labelled set");
    cmd->add_option("--chatter-predictions", chatter_predictions, "Predictions for a chatter set");
    cmd->add_option("--constraints", constraints, "Constraints to count violations against");
    cmd->add_option("--field", field, "Which probabilities to score")
        ->check(CLI::IsMember({"calibrated", "combined"}))->capture_default_str();
    cmd->add_option("--threshold", threshold, "Probability threshold")->capture_default_str();
    cmd->add_option("--out", out, "Report file (JSON)");
    cmd->add_option("--table", table, "Per-topic AP table (TSV)");
    cmd->callback([this] { run(); });
  }

  std::vector<LabelVector> pick(const std::vector<PredictionRecord>& records, std::size_t topics_n) const {
    std::vector<LabelVector> out;
    for (const auto& r : records) {
      out.push_back(field == "calibrated" ? r.calibrated : r.combined);
      if (out.back().size() != topics_n) throw DataError("prediction '" + r.id + "' has the wrong number of topics");
    }
    return out;
  }

  void run() const {
    if (predictions.empty() && chatter_predictions.empty()) {
      throw UsageError("evaluate needs --predictions and/or --chatter-predictions");
    }
    if (predictions.empty() != gold.empty()) throw UsageError("--predictions and --gold go together");
    const auto space = load_topics(topics);
    std::vector<LabelVector> labelled, gold_vectors, chatter;
    if (!predictions.empty()) {
      const auto records = load_predictions(predictions);
      const auto corpus = load_corpus(gold);
      std::map<std::string, const Document*> by_id;
      for (const auto& d : corpus.documents) by_id[d.id] = &d;
      labelled = pick(records, space.size());
      for (const auto& r : records) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw DataError("prediction '" + r.id + "' has no gold document");
        if (!it->second->gold_labels) throw DataError("document '" + r.id + "' has no gold_labels");
        gold_vectors.push_back(encode_labels(*it->second->gold_labels, space));
      }
    }
    if (!chatter_predictions.empty()) chatter = pick(load_predictions(chatter_predictions), space.size());
    ConstraintSet set;
    if (!constraints.empty()) set = load_constraints(constraints, space);
    const auto report = evaluate(space, labelled, gold_vectors, chatter, set, threshold);
    const auto json = to_json(report, space);
    if (!out.empty()) open_out(out) << json.dump(2) << '\n';
    if (!table.empty()) {
      auto t = open_out(table);
      write_ap_table(t, report, space);
    }
    if (report.median_aps) {
      std::printf("median APS (x100): %.2f over %zu topics\n", 100.0 * *report.median_aps, report.per_topic_ap.size());
    }
    std::printf("chatter count (> %.2f): %zu of %zu documents\n", threshold, report.chatter_count,
                report.chatter_documents);
    std::printf("violations: inclusion %zu, exclusion %zu\n", report.violations.inclusion, report.violations.exclusion);
  }
};

struct SynthCmd {
  std::string out_dir;
  SyntheticConfig config;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Write a seeded synthetic demo dataset");
    cmd->add_option("--out-dir", out_dir, "Directory to write into")->required();
    cmd->add_option("--documents", config.documents)->capture_default_str();
    cmd->add_option("--chatter-documents", config.chatter_documents)->capture_default_str();
    cmd->add_option("--topics", config.topics)->check(CLI::Range(2, 16))->capture_default_str();
    cmd->add_option("--seed", config.seed)->capture_default_str();
    cmd->callback([this] { run(); });
  }

  void run() const {
    std::filesystem::create_directories(out_dir);
    const auto data = make_synthetic(config);
    std::ostringstream topics;
    for (const auto& n : data.space.names()) topics << n << '\n';
    write_text(out_dir + "/topics.txt", topics.str());
    write_text(out_dir + "/rules.txt", synthetic_rules_text(data));
    save_corpus(out_dir + "/labelled.jsonl", data.labelled);
    save_corpus(out_dir + "/chatter.jsonl", data.chatter);
    std::cout << "wrote " << data.labelled.size() << " labelled and " << data.chatter.size()
              << " chatter documents to " << out_dir << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctm - multi-label topic classification with constraint calibration"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);

  WeakLabelCmd weak_label;
  SplitCmd split;
  TrainCmd train_cmd;
  PredictCmd predict;
  EvaluateCmd evaluate_cmd;
  SynthCmd synth;
  weak_label.add(app);
  split.add(app);
  train_cmd.add(app);
  predict.add(app);
  evaluate_cmd.add(app);
  synth.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ctm::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ctm::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ctm::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
