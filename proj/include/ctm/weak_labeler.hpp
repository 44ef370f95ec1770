#pragma once

// Keyword rules producing weak topic labels, and the chatter partition
// (documents no rule fires on).

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctm/corpus.hpp"
#include "ctm/error.hpp"
#include "ctm/text.hpp"
#include "ctm/topic_space.hpp"

namespace ctm {

namespace detail {

constexpr bool is_dropped_scalar(char32_t c) {
  if (c < 0x80) {
    return !((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9') ||
             c == U'#' || c == U'@' || c == U' ' || (c >= 0x09 && c <= 0x0D));
  }
  return (c >= 0xA1 && c <= 0xBF) || c == 0xD7 || c == 0xF7 || (c >= 0x2010 && c <= 0x2BFF) ||
         (c >= 0x3001 && c <= 0x303F) || (c >= 0xFE00 && c <= 0xFE0F) || c == 0xFFFD ||
         (c >= 0x1F000 && c <= 0x1FFFF);
}

constexpr bool is_unicode_space(char32_t c) {
  return c == 0xA0 || (c >= 0x2000 && c <= 0x200B) || c == 0x3000 || c == 0x2028 || c == 0x2029;
}

}  // namespace detail

/// Case-folds, deletes every character that is not a letter, digit, '#' or '@', then splits on
/// whitespace. Scalars outside ASCII count as letters unless they are punctuation or symbols.
inline std::vector<std::string> rule_tokens(std::string_view raw) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (char32_t cp : text::decode_utf8(raw)) {
    if (detail::is_unicode_space(cp)) {
      cleaned.push_back(' ');
    } else if (!detail::is_dropped_scalar(cp)) {
      text::append_utf8(cleaned, text::fold_scalar(cp));
    }
  }
  return text::split_whitespace(cleaned);
}

struct Rule {
  std::string topic;
  /// Keyword phrases in case-folded token form, unique within the rule.
  std::vector<std::vector<std::string>> keywords;
};

/// Compiled keyword rules. Phrases are indexed by their first token.
class RuleSet {
 public:
  RuleSet() = default;

  /// Adds one keyword for `topic`. Duplicate (topic, keyword) pairs are ignored.
  void add(const TopicSpace& space, const std::string& topic, std::string_view keyword) {
    if (!space.contains(topic)) throw DataError("rules: unknown topic '" + topic + "'");
    auto phrase = rule_tokens(keyword);
    if (phrase.empty()) throw DataError("rules: empty keyword for topic '" + topic + "'");
    auto [it, inserted] = rule_of_topic_.emplace(topic, rules_.size());
    if (inserted) rules_.push_back({topic, {}});
    auto& rule = rules_[it->second];
    for (const auto& existing : rule.keywords) {
      if (existing == phrase) return;
    }
    first_token_[phrase.front()].push_back({it->second, rule.keywords.size()});
    rule.keywords.push_back(std::move(phrase));
  }

  const std::vector<Rule>& rules() const { return rules_; }
  bool empty() const { return rules_.empty(); }

  /// Topics with at least one keyword occurring as a contiguous whole-token phrase in `raw_text`.
  std::set<std::string> match(std::string_view raw_text) const {
    std::set<std::string> topics;
    if (rules_.empty()) return topics;
    const auto tokens = rule_tokens(raw_text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = first_token_.find(tokens[i]);
      if (it == first_token_.end()) continue;
      for (auto [rule_idx, kw_idx] : it->second) {
        const auto& phrase = rules_[rule_idx].keywords[kw_idx];
        if (i + phrase.size() > tokens.size()) continue;
        bool hit = true;
        for (std::size_t k = 1; k < phrase.size() && hit; ++k) hit = tokens[i + k] == phrase[k];
        if (hit) topics.insert(rules_[rule_idx].topic);
      }
    }
    return topics;
  }

 private:
  std::vector<Rule> rules_;
  std::map<std::string, std::size_t> rule_of_topic_;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> first_token_;
};

/// Parses rule lines of the form `TopicName: kw1, kw2, ...`; `#` at line start comments a line.
inline RuleSet parse_rules(std::istream& in, const TopicSpace& space, const std::string& source = "rules") {
  RuleSet rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) throw DataError(where + "expected 'Topic: keywords'");
    const std::string topic(text::trim(body.substr(0, colon)));
    if (!space.contains(topic)) throw DataError(where + "unknown topic '" + topic + "'");
    std::string_view rest = body.substr(colon + 1);
    while (true) {
      const auto comma = rest.find(',');
      const auto keyword = text::trim(rest.substr(0, comma));
      try {
        rules.add(space, topic, keyword);
      } catch (const DataError& e) {
        throw DataError(where + e.what());
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return rules;
}

inline RuleSet compile_rules(const std::string& path, const TopicSpace& space) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rules file: " + path);
  return parse_rules(in, space, path);
}

inline std::set<std::string> weak_label(const Document& doc, const RuleSet& rules) {
  return rules.match(doc.text);
}

struct ChatterPartition {
  Corpus topical;
  Corpus chatter;
};

/// Splits a corpus by whether any rule fires. Every output document carries its weak labels
/// (empty for chatter).
inline ChatterPartition partition_chatter(const Corpus& corpus, const RuleSet& rules) {
  ChatterPartition out;
  out.topical.provenance = corpus.provenance + ".topical";
  out.chatter.provenance = corpus.provenance + ".chatter";
  for (const auto& doc : corpus.documents) {
    Document labeled = doc;
    labeled.weak_labels = weak_label(doc, rules);
    if (labeled.weak_labels->empty()) {
      out.chatter.documents.push_back(std::move(labeled));
    } else {
      out.topical.documents.push_back(std::move(labeled));
    }
  }
  return out;
}

}  // namespace ctm
