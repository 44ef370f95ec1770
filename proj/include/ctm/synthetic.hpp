#pragma once

// Seeded synthetic corpora with planted topic signal, for demos and
// end-to-end checks. Each topic owns strong keywords (also emitted as rules),
// weak cue words that also leak into chatter, and bio words used by authors
// who mostly post about that topic.

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctm/corpus.hpp"
#include "ctm/random.hpp"
#include "ctm/topic_space.hpp"

namespace ctm {

struct SyntheticConfig {
  std::size_t topics = 10;
  std::size_t documents = 2000;
  std::size_t authors = 200;
  std::size_t chatter_documents = 600;
  std::size_t chatter_authors = 60;
  double keyword_rate = 0.55;   // chance a label plants one of its strong keywords
  double cue_rate = 0.6;        // chance a label plants one of its cue words
  double home_topic_rate = 0.8; // chance an author's post is about their home topic
  double second_label_rate = 0.25;
  double chatter_cue_rate = 0.8;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  TopicSpace space;
  Corpus labelled;  // gold_labels set
  Corpus chatter;   // gold_labels empty
  std::vector<std::vector<std::string>> keywords;  // per topic
};

namespace detail {

inline const std::vector<std::string>& synthetic_topic_names() {
  static const std::vector<std::string> names = {
      "Cricket", "Basketball", "Soccer", "Jazz",   "K-pop",   "Physics", "Cats",   "Anime",
      "Cooking", "Travel",     "Chess",  "Poker",  "Surfing", "Opera",   "Sharks", "Fashion"};
  return names;
}

inline std::string synthetic_word(const char* kind, std::size_t topic, std::size_t k) {
  return std::string(kind) + std::to_string(topic) + "x" + std::to_string(k);
}

}  // namespace detail

inline SyntheticData make_synthetic(const SyntheticConfig& cfg) {
  const auto& pool = detail::synthetic_topic_names();
  std::vector<std::string> names;
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    names.push_back(t < pool.size() ? pool[t] : "Topic " + std::to_string(t));
  }
  SyntheticData data{TopicSpace(names), {}, {}, {}};
  data.labelled.provenance = "synthetic";
  data.chatter.provenance = "synthetic-chatter";

  constexpr std::size_t kKeywords = 4, kCues = 3, kBioWords = 3, kNoise = 300;
  std::vector<std::vector<std::string>> cues(cfg.topics), bio(cfg.topics);
  data.keywords.resize(cfg.topics);
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t k = 0; k < kKeywords; ++k) data.keywords[t].push_back(detail::synthetic_word("kw", t, k));
    for (std::size_t k = 0; k < kCues; ++k) cues[t].push_back(detail::synthetic_word("cue", t, k));
    for (std::size_t k = 0; k < kBioWords; ++k) bio[t].push_back(detail::synthetic_word("bio", t, k));
  }

  Rng rng(cfg.seed);
  auto noise = [&](std::ostringstream& os, std::size_t lo, std::size_t hi) {
    const std::size_t n = lo + rng.uniform_index(hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) os << " w" << rng.uniform_index(kNoise);
  };
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.uniform_index(v.size())]; };

  std::vector<std::size_t> home(cfg.authors);
  for (auto& h : home) h = rng.uniform_index(cfg.topics);

  for (std::size_t d = 0; d < cfg.documents; ++d) {
    const std::size_t a = rng.uniform_index(cfg.authors);
    std::set<std::size_t> labels;
    labels.insert(rng.bernoulli(cfg.home_topic_rate) ? home[a] : rng.uniform_index(cfg.topics));
    if (rng.bernoulli(cfg.second_label_rate)) labels.insert(rng.uniform_index(cfg.topics));

    std::ostringstream text;
    text << "post";
    noise(text, 2, 6);
    for (auto t : labels) {
      if (rng.bernoulli(cfg.keyword_rate)) text << ' ' << pick(data.keywords[t]);
      if (rng.bernoulli(cfg.cue_rate)) text << ' ' << pick(cues[t]);
    }
    noise(text, 1, 4);

    Document doc;
    doc.id = "s" + std::to_string(d);
    doc.text = text.str();
    doc.author.id = "a" + std::to_string(a);
    doc.author.name = "user " + std::to_string(a);
    std::ostringstream bio_text;
    bio_text << pick(bio[home[a]]) << ' ' << pick(bio[home[a]]);
    noise(bio_text, 1, 3);
    doc.author.bio = bio_text.str();
    doc.gold_labels.emplace();
    for (auto t : labels) doc.gold_labels->insert(names[t]);
    data.labelled.documents.push_back(std::move(doc));
  }

  for (std::size_t d = 0; d < cfg.chatter_documents; ++d) {
    const std::size_t a = rng.uniform_index(cfg.chatter_authors);
    std::ostringstream text;
    text << "post";
    noise(text, 3, 8);
    if (rng.bernoulli(cfg.chatter_cue_rate)) text << ' ' << pick(cues[rng.uniform_index(cfg.topics)]);
    if (rng.bernoulli(cfg.chatter_cue_rate / 2)) text << ' ' << pick(cues[rng.uniform_index(cfg.topics)]);
    noise(text, 1, 4);
    Document doc;
    doc.id = "c" + std::to_string(d);
    doc.text = text.str();
    doc.author.id = "ca" + std::to_string(a);
    doc.author.name = "chatty " + std::to_string(a);
    std::ostringstream bio_text;
    noise(bio_text, 2, 4);
    doc.author.bio = std::string(text::trim(bio_text.str()));
    doc.gold_labels.emplace();
    data.chatter.documents.push_back(std::move(doc));
  }
  return data;
}

/// Rules file text mapping each topic to its strong keywords.
inline std::string synthetic_rules_text(const SyntheticData& data) {
  std::ostringstream os;
  os << "# synthetic keyword rules\n";
  for (std::size_t t = 0; t < data.space.size(); ++t) {
    os << data.space.name(t) << ':';
    for (std::size_t k = 0; k < data.keywords[t].size(); ++k) os << (k ? ", " : " ") << data.keywords[t][k];
    os << '\n';
  }
  return os.str();
}

}  // namespace ctm
