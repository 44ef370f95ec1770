#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctm/error.hpp"
#include "ctm/text.hpp"

namespace ctm {

/// Per-topic values indexed by TopicSpace position: multi-hot bits, probabilities or logits.
using LabelVector = std::vector<double>;

/// Ordered registry of topic names. Index semantics are fixed at construction.
class TopicSpace {
 public:
  TopicSpace() = default;

  explicit TopicSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw DataError("topic space: empty topic list");
    index_.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], i).second) {
        throw DataError("topic space: duplicate topic '" + names_[i] + "'");
      }
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown topic '" + name + "'");
    return it->second;
  }

  bool operator==(const TopicSpace& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline TopicSpace register_topics(std::vector<std::string> names) {
  return TopicSpace(std::move(names));
}

/// One topic per line; blank lines are skipped, surrounding whitespace is not part of a name.
inline TopicSpace load_topics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open topics file: " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    auto name = text::trim(line);
    if (!name.empty()) names.emplace_back(name);
  }
  return TopicSpace(std::move(names));
}

/// Multi-hot encoding of a label set.
template <typename Labels>
LabelVector encode_labels(const Labels& labels, const TopicSpace& space) {
  LabelVector bits(space.size(), 0.0);
  for (const auto& label : labels) bits[space.index(label)] = 1.0;
  return bits;
}

/// Inverse of encode_labels: names at positions holding 1.
inline std::set<std::string> decode_labels(const LabelVector& bits, const TopicSpace& space) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < bits.size() && i < space.size(); ++i) {
    if (bits[i] != 0.0) labels.insert(space.name(i));
  }
  return labels;
}

}  // namespace ctm
