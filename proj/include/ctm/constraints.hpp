#pragma once

// Topic constraint model. Each constrained topic becomes a binary variable
// with a unary factor (1 - p, p) taken from the classifier; each constraint
// becomes a pairwise factor. Marginals come from sum-product belief
// propagation or, for small connected components, exact enumeration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctm/error.hpp"
#include "ctm/text.hpp"
#include "ctm/topic_space.hpp"

namespace ctm {

/// phi(x_row, x_col) over two binary variables.
struct PotentialMatrix {
  std::array<std::array<double, 2>, 2> v{};

  constexpr double operator()(int row, int col) const { return v[row][col]; }
  bool operator==(const PotentialMatrix&) const = default;

  bool valid() const {
    bool any_positive = false;
    for (const auto& r : v) {
      for (double x : r) {
        if (!std::isfinite(x) || x < 0.0) return false;
        any_positive = any_positive || x > 0.0;
      }
    }
    return any_positive;
  }
};

/// Rows index the broader topic p, columns the narrower topic c.
constexpr PotentialMatrix inclusion_potential() { return {{{{0.5, 0.0}, {0.5, 10.0}}}}; }

/// At most one of a and b active.
constexpr PotentialMatrix exclusion_potential() { return {{{{0.5, 0.5}, {0.5, 0.0}}}}; }

enum class ConstraintKind { kInclusion, kExclusion, kCustom };

/// Pairwise constraint; `first` indexes the potential's rows (the broader topic for inclusions).
struct Constraint {
  ConstraintKind kind;
  std::size_t first;
  std::size_t second;
  PotentialMatrix potential;
};

class ConstraintSet {
 public:
  void add_inclusion(std::size_t parent, std::size_t child) {
    add({ConstraintKind::kInclusion, parent, child, inclusion_potential()});
  }
  void add_exclusion(std::size_t a, std::size_t b) {
    add({ConstraintKind::kExclusion, a, b, exclusion_potential()});
  }
  void add_custom(std::size_t row, std::size_t col, const PotentialMatrix& potential) {
    if (!potential.valid()) throw DataError("constraint: potential needs non-negative entries, one positive");
    add({ConstraintKind::kCustom, row, col, potential});
  }

  const std::vector<Constraint>& all() const { return constraints_; }
  std::size_t size() const { return constraints_.size(); }
  bool empty() const { return constraints_.empty(); }

  std::vector<std::pair<std::size_t, std::size_t>> inclusions() const { return pairs_of(ConstraintKind::kInclusion); }
  std::vector<std::pair<std::size_t, std::size_t>> exclusions() const { return pairs_of(ConstraintKind::kExclusion); }

  /// Sorted topic indices touched by at least one constraint.
  std::vector<std::size_t> constrained_topics() const {
    std::set<std::size_t> s;
    for (const auto& c : constraints_) {
      s.insert(c.first);
      s.insert(c.second);
    }
    return {s.begin(), s.end()};
  }

  void validate(std::size_t topic_count) const {
    for (const auto& c : constraints_) {
      if (c.first >= topic_count || c.second >= topic_count) {
        throw DataError("constraint references topic index " + std::to_string(std::max(c.first, c.second)) +
                        " outside a space of " + std::to_string(topic_count));
      }
    }
  }

  /// Constraints with the given positions in all().
  ConstraintSet subset(std::span<const std::size_t> positions) const {
    ConstraintSet out;
    for (auto i : positions) out.constraints_.push_back(constraints_.at(i));
    return out;
  }

 private:
  static std::pair<std::size_t, std::size_t> unordered(std::size_t a, std::size_t b) {
    return {std::min(a, b), std::max(a, b)};
  }

  void add(const Constraint& c) {
    if (c.first == c.second) {
      throw DataError("constraint: topic " + std::to_string(c.first) + " paired with itself");
    }
    for (const auto& e : constraints_) {
      const bool same_ordered = e.first == c.first && e.second == c.second;
      const bool same_pair = unordered(e.first, e.second) == unordered(c.first, c.second);
      const bool exclusive_clash = same_pair && (e.kind == ConstraintKind::kExclusion ||
                                                 c.kind == ConstraintKind::kExclusion);
      if (same_ordered || exclusive_clash) {
        throw DataError("constraint: duplicate or contradictory constraint on topics " +
                        std::to_string(c.first) + " and " + std::to_string(c.second));
      }
    }
    constraints_.push_back(c);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs_of(ConstraintKind kind) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : constraints_) {
      if (c.kind == kind) out.emplace_back(c.first, c.second);
    }
    return out;
  }

  std::vector<Constraint> constraints_;
};

struct BPConfig {
  int max_iters = 100;
  double tolerance = 1e-8;
  double damping = 0.0;
  double clamp = 1e-6;
  std::size_t exact_component_limit = 20;

  void validate() const {
    if (max_iters < 1) throw UsageError("bp: max_iters must be at least 1");
    if (!(tolerance > 0.0)) throw UsageError("bp: tolerance must be positive");
    if (!(damping >= 0.0 && damping < 1.0)) throw UsageError("bp: damping must lie in [0, 1)");
    if (!(clamp > 0.0 && clamp < 0.5)) throw UsageError("bp: clamp must lie in (0, 0.5)");
  }
};

/// Distribution over {0, 1}.
using Message = std::array<double, 2>;

inline constexpr Message kUniformMessage{0.5, 0.5};

inline Message normalized(Message m) {
  const double z = m[0] + m[1];
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericError("belief propagation: contradictory evidence (all-zero message)");
  return {m[0] / z, m[1] / z};
}

/// Componentwise product of messages, renormalized.
inline Message normalized_product(std::span<const Message> messages) {
  Message m{1.0, 1.0};
  for (const auto& in : messages) {
    m[0] *= in[0];
    m[1] *= in[1];
  }
  return normalized(m);
}

/// Sums the potential against the message arriving from the other endpoint.
/// `to_row` selects whether the target variable indexes rows or columns.
inline Message factor_message(const PotentialMatrix& phi, bool to_row, const Message& incoming) {
  Message m{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) m[x] += (to_row ? phi(x, y) : phi(y, x)) * incoming[y];
  }
  return normalized(m);
}

inline double clamp_probability(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

struct PairwiseFactor {
  std::array<std::size_t, 2> vars;  // local variable ids: {row, column}
  PotentialMatrix potential;
};

/// Bipartite graph over the constrained topics. Messages are stored per factor endpoint:
/// to_factor[f][s] flows from variable vars[s] into factor f, to_variable[f][s] the reverse.
struct FactorGraph {
  std::vector<std::size_t> topics;  // local variable id -> topic index
  std::vector<Message> unary;       // (1 - p, p) from clamped probabilities
  std::vector<PairwiseFactor> factors;
  std::vector<std::vector<std::pair<std::size_t, int>>> adjacency;  // variable -> (factor, side)
  std::vector<std::array<Message, 2>> to_factor;
  std::vector<std::array<Message, 2>> to_variable;
  std::vector<std::size_t> passthrough;  // topics not in any constraint

  std::size_t variable_count() const { return topics.size(); }

  void reset_messages() {
    to_factor.assign(factors.size(), {kUniformMessage, kUniformMessage});
    to_variable.assign(factors.size(), {kUniformMessage, kUniformMessage});
  }
};

inline FactorGraph build_factor_graph(std::span<const double> probs, const ConstraintSet& constraints,
                                      const BPConfig& config = {}) {
  constraints.validate(probs.size());
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("factor graph: probability outside [0, 1]");
  }
  FactorGraph g;
  g.topics = constraints.constrained_topics();
  std::vector<std::size_t> local(probs.size(), SIZE_MAX);
  for (std::size_t i = 0; i < g.topics.size(); ++i) {
    local[g.topics[i]] = i;
    const double p = clamp_probability(probs[g.topics[i]], config.clamp);
    g.unary.push_back({1.0 - p, p});
  }
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (local[t] == SIZE_MAX) g.passthrough.push_back(t);
  }
  g.adjacency.resize(g.topics.size());
  for (const auto& c : constraints.all()) {
    const std::size_t f = g.factors.size();
    g.factors.push_back({{local[c.first], local[c.second]}, c.potential});
    g.adjacency[local[c.first]].emplace_back(f, 0);
    g.adjacency[local[c.second]].emplace_back(f, 1);
  }
  g.reset_messages();
  return g;
}

/// Product of the unary factor and every incoming factor message at `var` except the one from
/// `excluded` (pass SIZE_MAX to keep all), renormalized.
inline Message variable_belief(const FactorGraph& g, std::size_t var, std::size_t excluded = SIZE_MAX) {
  Message m = g.unary[var];
  for (auto [f, side] : g.adjacency[var]) {
    if (f == excluded) continue;
    m[0] *= g.to_variable[f][side][0];
    m[1] *= g.to_variable[f][side][1];
  }
  return normalized(m);
}

/// Message from the variable at `side` of factor `f` into that factor.
inline Message variable_to_factor_message(const FactorGraph& g, std::size_t f, int side) {
  return variable_belief(g, g.factors[f].vars[side], f);
}

/// Message from factor `f` into the variable at `side`, using the other endpoint's current message.
inline Message factor_to_variable_message(const FactorGraph& g, std::size_t f, int side) {
  return factor_message(g.factors[f].potential, side == 0, g.to_factor[f][1 - side]);
}

struct BPResult {
  std::vector<double> marginals;  // Pr(v = 1) per local variable
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
};

inline std::vector<double> current_marginals(const FactorGraph& g) {
  std::vector<double> out(g.variable_count());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = variable_belief(g, v)[1];
  return out;
}

/// Flooding sum-product from uniform messages. Each iteration refreshes every variable-to-factor
/// message from the previous factor messages, then every factor-to-variable message from those.
/// Stops when the largest change of any message entry drops below the tolerance.
inline BPResult run_belief_propagation(FactorGraph& g, const BPConfig& config = {}) {
  config.validate();
  g.reset_messages();
  BPResult result;
  const double keep = config.damping;
  auto blend = [keep](const Message& fresh, const Message& old) -> Message {
    if (keep == 0.0) return fresh;
    return {(1.0 - keep) * fresh[0] + keep * old[0], (1.0 - keep) * fresh[1] + keep * old[1]};
  };
  if (g.factors.empty()) {
    result.converged = true;
    result.marginals = current_marginals(g);
    return result;
  }
  std::vector<std::array<Message, 2>> next(g.factors.size());
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    double change = 0.0;
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      for (int s = 0; s < 2; ++s) next[f][s] = blend(variable_to_factor_message(g, f, s), g.to_factor[f][s]);
    }
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      for (int s = 0; s < 2; ++s) {
        for (int x = 0; x < 2; ++x) change = std::max(change, std::abs(next[f][s][x] - g.to_factor[f][s][x]));
      }
    }
    std::swap(g.to_factor, next);
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      for (int s = 0; s < 2; ++s) next[f][s] = blend(factor_to_variable_message(g, f, s), g.to_variable[f][s]);
    }
    for (std::size_t f = 0; f < g.factors.size(); ++f) {
      for (int s = 0; s < 2; ++s) {
        for (int x = 0; x < 2; ++x) change = std::max(change, std::abs(next[f][s][x] - g.to_variable[f][s][x]));
      }
    }
    std::swap(g.to_variable, next);
    result.iterations = iter;
    result.last_change = change;
    if (change < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.marginals = current_marginals(g);
  return result;
}

// ---------------------------------------------------------------------------
// Exact inference

/// Connected component of the constraint graph.
struct ConstraintComponent {
  std::vector<std::size_t> topics;       // sorted
  std::vector<std::size_t> constraints;  // positions in ConstraintSet::all()
};

/// Components ordered by their smallest topic index.
inline std::vector<ConstraintComponent> connected_components(const ConstraintSet& constraints) {
  const auto topics = constraints.constrained_topics();
  std::map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < topics.size(); ++i) local[topics[i]] = i;
  std::vector<std::size_t> parent(topics.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& c : constraints.all()) {
    auto a = find(local[c.first]), b = find(local[c.second]);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::size_t, std::size_t> slot;  // root -> component
  std::vector<ConstraintComponent> out;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    auto [it, inserted] = slot.emplace(find(i), out.size());
    if (inserted) out.emplace_back();
    out[it->second].topics.push_back(topics[i]);
  }
  const auto& all = constraints.all();
  for (std::size_t k = 0; k < all.size(); ++k) out[slot.at(find(local[all[k].first]))].constraints.push_back(k);
  return out;
}

inline constexpr std::size_t kMaxEnumerationVariables = 25;

/// Exact Pr(v = 1) for every variable of a factor graph by summing over all joint states.
inline std::vector<double> enumerate_marginals(const FactorGraph& g) {
  const std::size_t n = g.variable_count();
  if (n > kMaxEnumerationVariables) {
    throw UsageError("exact inference: component of " + std::to_string(n) + " variables exceeds " +
                     std::to_string(kMaxEnumerationVariables));
  }
  std::vector<double> mass(n, 0.0);
  double z = 0.0;
  const std::uint64_t states = std::uint64_t{1} << n;
  for (std::uint64_t s = 0; s < states; ++s) {
    double w = 1.0;
    for (std::size_t v = 0; v < n && w > 0.0; ++v) w *= g.unary[v][(s >> v) & 1];
    for (std::size_t f = 0; f < g.factors.size() && w > 0.0; ++f) {
      const auto& fac = g.factors[f];
      w *= fac.potential((s >> fac.vars[0]) & 1, (s >> fac.vars[1]) & 1);
    }
    if (w == 0.0) continue;
    z += w;
    for (std::size_t v = 0; v < n; ++v) {
      if ((s >> v) & 1) mass[v] += w;
    }
  }
  if (!(z > 0.0)) throw NumericError("exact inference: zero partition function");
  for (auto& m : mass) m /= z;
  return mass;
}

/// Exact marginals for every constrained topic, one component at a time; other entries are copied.
inline LabelVector brute_force_marginals(std::span<const double> probs, const ConstraintSet& constraints,
                                         double eps = 1e-6) {
  constraints.validate(probs.size());
  BPConfig cfg;
  cfg.clamp = eps;
  LabelVector out(probs.begin(), probs.end());
  for (const auto& comp : connected_components(constraints)) {
    const auto g = build_factor_graph(probs, constraints.subset(comp.constraints), cfg);
    const auto m = enumerate_marginals(g);
    for (std::size_t v = 0; v < m.size(); ++v) out[g.topics[v]] = m[v];
  }
  return out;
}

struct CalibrationResult {
  LabelVector probabilities;
  std::size_t exact_components = 0;
  std::size_t bp_components = 0;
  int max_bp_iterations = 0;
  bool converged = true;
};

/// Re-calibrates combined probabilities under the constraints. Components of at most
/// exact_component_limit topics are enumerated; larger ones run loopy BP. Unconstrained topics are
/// copied bit for bit.
inline CalibrationResult calibrate(std::span<const double> probs, const ConstraintSet& constraints,
                                   const BPConfig& config = {}) {
  config.validate();
  constraints.validate(probs.size());
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("calibrate: probability outside [0, 1]");
  }
  CalibrationResult result;
  result.probabilities.assign(probs.begin(), probs.end());
  for (const auto& comp : connected_components(constraints)) {
    auto g = build_factor_graph(probs, constraints.subset(comp.constraints), config);
    std::vector<double> m;
    if (comp.topics.size() <= std::min(config.exact_component_limit, kMaxEnumerationVariables)) {
      m = enumerate_marginals(g);
      ++result.exact_components;
    } else {
      auto bp = run_belief_propagation(g, config);
      m = std::move(bp.marginals);
      ++result.bp_components;
      result.max_bp_iterations = std::max(result.max_bp_iterations, bp.iterations);
      result.converged = result.converged && bp.converged;
    }
    for (std::size_t v = 0; v < m.size(); ++v) result.probabilities[g.topics[v]] = std::clamp(m[v], 0.0, 1.0);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Constraints file:
//   includes <BroaderTopic> <NarrowerTopic>
//   excludes <TopicA> <TopicB>
//   potential <RowTopic> <ColumnTopic> phi00 phi01 phi10 phi11
// Names with spaces may be double-quoted; unquoted names are resolved by the
// unique split of the remaining words into two known topics.

namespace detail {

inline std::vector<std::string> split_quoted(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && text::is_space(line[i])) ++i;
    if (i >= line.size()) break;
    if (line[i] == '"') {
      const auto close = line.find('"', i + 1);
      if (close == std::string_view::npos) throw DataError("unterminated quote");
      out.emplace_back(line.substr(i + 1, close - i - 1));
      out.back().insert(0, 1, '\x01');  // marks a quoted word
      i = close + 1;
    } else {
      const auto start = i;
      while (i < line.size() && !text::is_space(line[i])) ++i;
      out.emplace_back(line.substr(start, i - start));
    }
  }
  return out;
}

inline std::pair<std::size_t, std::size_t> resolve_pair(const std::vector<std::string>& words,
                                                        const TopicSpace& space) {
  const bool quoted = std::any_of(words.begin(), words.end(), [](const std::string& w) { return w.starts_with('\x01'); });
  if (quoted) {
    if (words.size() != 2) throw DataError("expected exactly two topic names");
    auto name = [](const std::string& w) { return w.starts_with('\x01') ? w.substr(1) : w; };
    return {space.index(name(words[0])), space.index(name(words[1]))};
  }
  std::optional<std::pair<std::size_t, std::size_t>> found;
  for (std::size_t cut = 1; cut < words.size(); ++cut) {
    const std::vector<std::string> left(words.begin(), words.begin() + cut);
    const std::vector<std::string> right(words.begin() + cut, words.end());
    const auto a = text::join(left), b = text::join(right);
    if (space.contains(a) && space.contains(b)) {
      if (found) throw DataError("ambiguous topic names; quote them");
      found = {space.index(a), space.index(b)};
    }
  }
  if (!found) throw DataError("could not resolve two known topic names");
  return *found;
}

inline double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw DataError("bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline ConstraintSet parse_constraints(std::istream& in, const TopicSpace& space,
                                       const std::string& source = "constraints") {
  ConstraintSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    try {
      auto words = detail::split_quoted(body);
      const std::string verb = words.front();
      words.erase(words.begin());
      if (verb == "includes") {
        auto [p, c] = detail::resolve_pair(words, space);
        set.add_inclusion(p, c);
      } else if (verb == "excludes") {
        auto [a, b] = detail::resolve_pair(words, space);
        set.add_exclusion(a, b);
      } else if (verb == "potential") {
        if (words.size() < 6) throw DataError("potential needs two topics and four values");
        PotentialMatrix phi;
        for (int k = 0; k < 4; ++k) phi.v[k / 2][k % 2] = detail::parse_real(words[words.size() - 4 + k]);
        words.resize(words.size() - 4);
        auto [a, b] = detail::resolve_pair(words, space);
        set.add_custom(a, b, phi);
      } else {
        throw DataError("unknown constraint kind '" + verb + "'");
      }
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

inline ConstraintSet load_constraints(const std::string& path, const TopicSpace& space) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open constraints file: " + path);
  return parse_constraints(in, space, path);
}

}  // namespace ctm
