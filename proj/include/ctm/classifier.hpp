#pragma once

// Dual linear encoders over hashed word n-grams. The content head and the
// author head each emit one logit per topic; the logits are summed and passed
// through a sigmoid. Training is per-example SGD on class-weighted binary
// cross-entropy with gradients flowing to both heads through the summed logit.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctm/corpus.hpp"
#include "ctm/error.hpp"
#include "ctm/features.hpp"
#include "ctm/random.hpp"
#include "ctm/text.hpp"
#include "ctm/topic_space.hpp"

namespace ctm {

inline constexpr std::string_view kHashId = "fnv1a64-mod-d";
inline constexpr int kModelFormatVersion = 1;
inline constexpr double kProbabilityClamp = 1e-7;

struct SparseFeatureVector {
  std::vector<std::uint32_t> indices;  // strictly increasing, < dim
  std::vector<double> values;
  std::uint32_t dim = 0;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

/// Binary presence of hashed word unigrams and bigrams.
inline SparseFeatureVector featurize(std::string_view input, std::uint32_t dim) {
  if (dim < 2) throw UsageError("feature dimensionality must be at least 2");
  SparseFeatureVector fv;
  fv.dim = dim;
  const auto tokens = text::split_whitespace(input);
  fv.indices.reserve(2 * tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    fv.indices.push_back(static_cast<std::uint32_t>(text::fnv1a64(tokens[i]) % dim));
    if (i + 1 < tokens.size()) {
      const std::string bigram = tokens[i] + " " + tokens[i + 1];
      fv.indices.push_back(static_cast<std::uint32_t>(text::fnv1a64(bigram) % dim));
    }
  }
  std::sort(fv.indices.begin(), fv.indices.end());
  fv.indices.erase(std::unique(fv.indices.begin(), fv.indices.end()), fv.indices.end());
  fv.values.assign(fv.indices.size(), 1.0);
  return fv;
}

/// One encoder head: per-topic bias plus a |topics| x dim weight matrix, stored feature-major and
/// allocated only for features that have been touched.
class LinearHead {
 public:
  LinearHead() = default;
  explicit LinearHead(std::size_t topics) : bias_(topics, 0.0) {}

  std::size_t topics() const { return bias_.size(); }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  /// Weights of feature `j` across all topics, or nullptr when the column is all zero.
  const std::vector<double>* column(std::uint32_t j) const {
    auto it = columns_.find(j);
    return it == columns_.end() ? nullptr : &it->second;
  }
  std::vector<double>& column_mut(std::uint32_t j) {
    auto it = columns_.find(j);
    if (it == columns_.end()) it = columns_.emplace(j, std::vector<double>(bias_.size(), 0.0)).first;
    return it->second;
  }

  double weight(std::size_t topic, std::uint32_t j) const {
    const auto* col = column(j);
    return col ? (*col)[topic] : 0.0;
  }

  LabelVector logits(const SparseFeatureVector& x) const {
    LabelVector out = bias_;
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      const auto* col = column(x.indices[k]);
      if (!col) continue;
      const double v = x.values[k];
      for (std::size_t t = 0; t < out.size(); ++t) out[t] += (*col)[t] * v;
    }
    return out;
  }

  /// Touched feature indices in increasing order.
  std::vector<std::uint32_t> touched() const {
    std::vector<std::uint32_t> keys;
    keys.reserve(columns_.size());
    for (const auto& [j, col] : columns_) keys.push_back(j);
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  bool all_finite() const {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(bias_)) return false;
    for (const auto& [j, col] : columns_) {
      if (!finite(col)) return false;
    }
    return true;
  }

 private:
  std::vector<double> bias_;
  std::unordered_map<std::uint32_t, std::vector<double>> columns_;
};

struct LinearDualModel {
  TopicSpace space;
  std::uint32_t dim = 0;
  FeatureToggles toggles;
  LinearHead content;
  LinearHead author;

  LinearDualModel() = default;
  LinearDualModel(TopicSpace topics, std::uint32_t dimensionality, FeatureToggles feature_toggles = {})
      : space(std::move(topics)),
        dim(dimensionality),
        toggles(feature_toggles),
        content(space.size()),
        author(space.size()) {
    if (dim < 2) throw UsageError("feature dimensionality must be at least 2");
  }
};

/// Hashed inputs of one document for both heads.
struct EncodedDocument {
  SparseFeatureVector content;
  SparseFeatureVector author;
};

inline EncodedDocument encode_document(const Document& doc, std::uint32_t dim, const FeatureToggles& toggles) {
  return {featurize(assemble_content_input(doc, toggles), dim),
          featurize(assemble_author_input(doc, toggles), dim)};
}

struct DualLogits {
  LabelVector content;
  LabelVector author;
};

inline DualLogits predict_logits(const LinearDualModel& model, const EncodedDocument& x) {
  return {model.content.logits(x.content), model.author.logits(x.author)};
}

inline DualLogits predict_logits(const LinearDualModel& model, const Document& doc) {
  return predict_logits(model, encode_document(doc, model.dim, model.toggles));
}

inline LabelVector combine_logits(const LabelVector& content, const LabelVector& author) {
  if (content.size() != author.size()) throw DataError("combine_logits: length mismatch");
  LabelVector out(content.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = content[i] + author[i];
  return out;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline LabelVector to_probabilities(const LabelVector& logits) {
  LabelVector p(logits.size());
  std::transform(logits.begin(), logits.end(), p.begin(), sigmoid);
  return p;
}

/// Combined probabilities for one document.
inline LabelVector predict_probabilities(const LinearDualModel& model, const Document& doc) {
  const auto logits = predict_logits(model, doc);
  return to_probabilities(combine_logits(logits.content, logits.author));
}

/// -sum_t [ w_t y_t ln p_t + (1 - y_t) ln(1 - p_t) ], probabilities clamped to [1e-7, 1 - 1e-7].
inline double weighted_bce_loss(const LabelVector& probs, const LabelVector& gold, const LabelVector& weights) {
  if (probs.size() != gold.size() || probs.size() != weights.size()) {
    throw DataError("weighted_bce_loss: length mismatch");
  }
  double loss = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const double p = std::clamp(probs[t], kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= weights[t] * gold[t] * std::log(p) + (1.0 - gold[t]) * std::log(1.0 - p);
  }
  return loss;
}

/// dL/dz_t at the fused logit: w_t y_t (p_t - 1) + (1 - y_t) p_t.
inline LabelVector loss_gradient_wrt_logits(const LabelVector& probs, const LabelVector& gold,
                                            const LabelVector& weights) {
  LabelVector g(probs.size());
  for (std::size_t t = 0; t < g.size(); ++t) {
    g[t] = weights[t] * gold[t] * (probs[t] - 1.0) + (1.0 - gold[t]) * probs[t];
  }
  return g;
}

/// Loss of one encoded example under the model.
inline double example_loss(const LinearDualModel& model, const EncodedDocument& x, const LabelVector& gold,
                           const LabelVector& weights) {
  const auto logits = predict_logits(model, x);
  return weighted_bce_loss(to_probabilities(combine_logits(logits.content, logits.author)), gold, weights);
}

/// Gradient of example_loss with respect to every parameter the example touches. Column k of
/// `content` pairs with x.content.indices[k] (same for author).
struct ExampleGradient {
  LabelVector content_bias;
  LabelVector author_bias;
  std::vector<LabelVector> content;
  std::vector<LabelVector> author;
};

inline ExampleGradient example_gradient(const LinearDualModel& model, const EncodedDocument& x,
                                        const LabelVector& gold, const LabelVector& weights) {
  const auto logits = predict_logits(model, x);
  const auto probs = to_probabilities(combine_logits(logits.content, logits.author));
  const auto g = loss_gradient_wrt_logits(probs, gold, weights);
  ExampleGradient out{g, g, {}, {}};
  auto columns = [&g](const SparseFeatureVector& fv) {
    std::vector<LabelVector> cols(fv.nnz(), LabelVector(g.size()));
    for (std::size_t k = 0; k < fv.nnz(); ++k) {
      for (std::size_t t = 0; t < g.size(); ++t) cols[k][t] = g[t] * fv.values[k];
    }
    return cols;
  };
  out.content = columns(x.content);
  out.author = columns(x.author);
  return out;
}

enum class LabelSource { kGold, kWeak };

struct TrainConfig {
  int epochs = 5;
  double learning_rate = 0.1;
  std::uint32_t dim = 1u << 18;
  double max_class_weight = 100.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  FeatureToggles toggles;
};

struct TrainResult {
  LinearDualModel model;
  LabelVector class_weights;
  /// Mean pre-update example loss of each epoch.
  std::vector<double> epoch_loss;
};

/// Positive-class weights min(N / (2 N_t), w_max); topics with no positives get w_max.
inline LabelVector class_weights(const std::vector<LabelVector>& targets, std::size_t topics, double max_weight) {
  std::vector<std::size_t> positives(topics, 0);
  for (const auto& y : targets) {
    for (std::size_t t = 0; t < topics; ++t) positives[t] += y[t] != 0.0;
  }
  LabelVector w(topics, max_weight);
  const double n = static_cast<double>(targets.size());
  for (std::size_t t = 0; t < topics; ++t) {
    if (positives[t] > 0) w[t] = std::min(n / (2.0 * static_cast<double>(positives[t])), max_weight);
  }
  return w;
}

inline const std::set<std::string>& labels_from(const Document& doc, LabelSource source) {
  const auto& labels = source == LabelSource::kGold ? doc.gold_labels : doc.weak_labels;
  if (!labels) {
    throw DataError("document '" + doc.id + "' has no " +
                    (source == LabelSource::kGold ? "gold_labels" : "weak_labels"));
  }
  return *labels;
}

inline void apply_sgd_step(LinearHead& head, const SparseFeatureVector& x, const LabelVector& g, double lr,
                           double l2) {
  auto& bias = head.bias();
  for (std::size_t t = 0; t < g.size(); ++t) bias[t] -= lr * g[t];
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    auto& col = head.column_mut(x.indices[k]);
    const double v = x.values[k];
    for (std::size_t t = 0; t < g.size(); ++t) col[t] -= lr * (g[t] * v + l2 * col[t]);
  }
}

/// Per-example SGD over both heads jointly. Example order is reshuffled each epoch from `seed`.
/// With `init`, training starts from that model (fine-tuning); its topics and dim must match.
inline TrainResult train(const Corpus& corpus, LabelSource source, const TopicSpace& space,
                         const TrainConfig& config, const LinearDualModel* init = nullptr) {
  if (corpus.empty()) throw DataError("train: empty corpus");
  if (config.epochs < 1) throw UsageError("train: epochs must be at least 1");
  if (!(config.learning_rate > 0.0)) throw UsageError("train: learning rate must be positive");
  if (!(config.max_class_weight > 0.0)) throw UsageError("train: class-weight cap must be positive");
  if (config.l2 < 0.0) throw UsageError("train: l2 must be non-negative");

  TrainResult result;
  if (init) {
    if (!(init->space == space)) throw DataError("train: initial model has a different topic list");
    if (init->dim != config.dim) {
      throw DataError("train: initial model has dim " + std::to_string(init->dim) + ", config has " +
                      std::to_string(config.dim));
    }
    result.model = *init;
    result.model.toggles = config.toggles;
  } else {
    result.model = LinearDualModel(space, config.dim, config.toggles);
  }
  auto& model = result.model;

  std::vector<EncodedDocument> inputs;
  std::vector<LabelVector> targets;
  inputs.reserve(corpus.size());
  targets.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    try {
      targets.push_back(encode_labels(labels_from(doc, source), space));
    } catch (const DataError& e) {
      throw DataError("document '" + doc.id + "': " + e.what());
    }
    inputs.push_back(encode_document(doc, config.dim, config.toggles));
  }
  result.class_weights = class_weights(targets, space.size(), config.max_class_weight);
  const auto& weights = result.class_weights;

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t i : order) {
      const auto logits = predict_logits(model, inputs[i]);
      const auto probs = to_probabilities(combine_logits(logits.content, logits.author));
      total += weighted_bce_loss(probs, targets[i], weights);
      const auto g = loss_gradient_wrt_logits(probs, targets[i], weights);
      apply_sgd_step(model.content, inputs[i].content, g, config.learning_rate, config.l2);
      apply_sgd_step(model.author, inputs[i].author, g, config.learning_rate, config.l2);
    }
    const double mean = total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw NumericError("train: loss diverged in epoch " + std::to_string(epoch + 1));
    result.epoch_loss.push_back(mean);
  }
  if (!model.content.all_finite() || !model.author.all_finite()) {
    throw NumericError("train: non-finite weights");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model file. Text format; reals are written as hexadecimal floats so a load
// reproduces every weight bit for bit.

namespace detail {

inline std::string hex_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, end);
}

inline double parse_hex_double(std::string_view s) {
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("model file: bad number '" + std::string(s) + "'");
  }
  return negative ? -v : v;
}

inline void write_head(std::ostream& out, const char* name, const LinearHead& head) {
  out << name << '\n' << "bias";
  for (double b : head.bias()) out << ' ' << hex_double(b);
  out << '\n';
  const auto keys = head.touched();
  out << "columns " << keys.size() << '\n';
  for (auto j : keys) {
    out << j;
    for (double w : *head.column(j)) out << ' ' << hex_double(w);
    out << '\n';
  }
}

inline std::vector<std::string> expect_line(std::istream& in, std::string_view keyword) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("model file: truncated before '" + std::string(keyword) + "'");
  auto fields = text::split_whitespace(line);
  if (fields.empty() || fields.front() != keyword) {
    throw DataError("model file: expected '" + std::string(keyword) + "', got '" + line + "'");
  }
  return fields;
}

inline std::size_t parse_count(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("model file: bad integer '" + s + "'");
  return v;
}

inline LinearHead read_head(std::istream& in, std::string_view name, std::size_t topics, std::uint32_t dim) {
  expect_line(in, name);
  LinearHead head(topics);
  auto bias = expect_line(in, "bias");
  if (bias.size() != topics + 1) throw DataError("model file: bias length mismatch");
  for (std::size_t t = 0; t < topics; ++t) head.bias()[t] = parse_hex_double(bias[t + 1]);
  const auto n = parse_count(expect_line(in, "columns").at(1));
  std::string line;
  for (std::size_t c = 0; c < n; ++c) {
    if (!std::getline(in, line)) throw DataError("model file: truncated weight columns");
    auto fields = text::split_whitespace(line);
    if (fields.size() != topics + 1) throw DataError("model file: weight column length mismatch");
    const auto j = parse_count(fields[0]);
    if (j >= dim) throw DataError("model file: feature index out of range");
    auto& col = head.column_mut(static_cast<std::uint32_t>(j));
    for (std::size_t t = 0; t < topics; ++t) col[t] = parse_hex_double(fields[t + 1]);
  }
  return head;
}

}  // namespace detail

inline void write_model(std::ostream& out, const LinearDualModel& model) {
  out << "ctm-linear-dual-model " << kModelFormatVersion << '\n';
  out << "hash " << kHashId << '\n';
  out << "dim " << model.dim << '\n';
  out << "toggles links=" << model.toggles.use_links << " media=" << model.toggles.use_media
      << " entities=" << model.toggles.use_entities << " author=" << model.toggles.use_author << '\n';
  out << "topics " << model.space.size() << '\n';
  for (const auto& name : model.space.names()) out << name << '\n';
  detail::write_head(out, "content", model.content);
  detail::write_head(out, "author", model.author);
  out << "end\n";
}

inline LinearDualModel read_model(std::istream& in) {
  using detail::expect_line;
  const auto header = expect_line(in, "ctm-linear-dual-model");
  if (header.size() != 2 || detail::parse_count(header[1]) != kModelFormatVersion) {
    throw DataError("model file: unsupported format version");
  }
  const auto hash = expect_line(in, "hash");
  if (hash.size() != 2 || hash[1] != kHashId) throw DataError("model file: unknown hash function");
  const auto dim = detail::parse_count(expect_line(in, "dim").at(1));
  if (dim < 2 || dim > UINT32_MAX) throw DataError("model file: bad dim");
  FeatureToggles toggles;
  const auto tog = expect_line(in, "toggles");
  if (tog.size() != 5) throw DataError("model file: bad toggles line");
  auto flag = [](const std::string& field, std::string_view key) {
    if (!field.starts_with(key) || field.size() != key.size() + 2 || field[key.size()] != '=') {
      throw DataError("model file: bad toggle '" + field + "'");
    }
    return field.back() == '1';
  };
  toggles.use_links = flag(tog[1], "links");
  toggles.use_media = flag(tog[2], "media");
  toggles.use_entities = flag(tog[3], "entities");
  toggles.use_author = flag(tog[4], "author");
  const auto n_topics = detail::parse_count(expect_line(in, "topics").at(1));
  std::vector<std::string> names;
  std::string line;
  for (std::size_t i = 0; i < n_topics; ++i) {
    if (!std::getline(in, line)) throw DataError("model file: truncated topic list");
    names.push_back(line);
  }
  LinearDualModel model(TopicSpace(std::move(names)), static_cast<std::uint32_t>(dim), toggles);
  model.content = detail::read_head(in, "content", n_topics, model.dim);
  model.author = detail::read_head(in, "author", n_topics, model.dim);
  expect_line(in, "end");
  if (!model.content.all_finite() || !model.author.all_finite()) throw DataError("model file: non-finite weight");
  return model;
}

inline void save_model(const std::string& path, const LinearDualModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  write_model(out, model);
}

inline LinearDualModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  return read_model(in);
}

}  // namespace ctm
