#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ctm/error.hpp"
#include "ctm/random.hpp"
#include "ctm/text.hpp"

namespace ctm {

inline constexpr std::size_t kMaxTextScalars = 4000;

struct Hyperlink {
  std::string url;
  std::string title;
  std::string description;
};

struct Author {
  std::string id;
  std::string name;
  std::string bio;
};

/// One post with everything the feature encoders may consume.
struct Document {
  std::string id;
  std::string text;
  std::vector<Hyperlink> hyperlinks;
  std::vector<std::string> media_annotations;
  std::vector<std::string> entity_descriptions;
  Author author;
  std::optional<std::set<std::string>> gold_labels;
  std::optional<std::set<std::string>> weak_labels;
};

struct Corpus {
  std::vector<Document> documents;
  std::string provenance;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
};

namespace detail {

using nlohmann::json;

inline std::string optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  return it->get<std::string>();
}

inline std::vector<std::string> optional_strings(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  return it->get<std::vector<std::string>>();
}

inline std::optional<std::set<std::string>> optional_label_set(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  auto labels = it->get<std::vector<std::string>>();
  return std::set<std::string>(labels.begin(), labels.end());
}

inline Document document_from_json(const json& obj) {
  if (!obj.is_object()) throw DataError("record is not an object");
  Document doc;
  if (!obj.contains("id")) throw DataError("missing required field 'id'");
  if (!obj.contains("text")) throw DataError("missing required field 'text'");
  if (!obj.contains("author")) throw DataError("missing required field 'author'");
  doc.id = obj.at("id").get<std::string>();
  doc.text = obj.at("text").get<std::string>();
  if (doc.id.empty()) throw DataError("empty 'id'");
  if (text::scalar_count(doc.text) > kMaxTextScalars) {
    throw DataError("'text' longer than " + std::to_string(kMaxTextScalars) + " characters");
  }
  if (auto it = obj.find("hyperlinks"); it != obj.end() && !it->is_null()) {
    for (const auto& link : *it) {
      doc.hyperlinks.push_back({optional_string(link, "url"), optional_string(link, "title"),
                                optional_string(link, "description")});
    }
  }
  doc.media_annotations = optional_strings(obj, "media_annotations");
  doc.entity_descriptions = optional_strings(obj, "entity_descriptions");
  const auto& author = obj.at("author");
  if (!author.is_object()) throw DataError("'author' is not an object");
  doc.author = {optional_string(author, "id"), optional_string(author, "name"),
                optional_string(author, "bio")};
  if (doc.author.id.empty()) throw DataError("missing or empty 'author.id'");
  doc.gold_labels = optional_label_set(obj, "gold_labels");
  doc.weak_labels = optional_label_set(obj, "weak_labels");
  return doc;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Document& doc) {
  nlohmann::ordered_json obj;
  obj["id"] = doc.id;
  obj["text"] = doc.text;
  auto links = nlohmann::ordered_json::array();
  for (const auto& l : doc.hyperlinks) {
    links.push_back({{"url", l.url}, {"title", l.title}, {"description", l.description}});
  }
  obj["hyperlinks"] = std::move(links);
  obj["media_annotations"] = doc.media_annotations;
  obj["entity_descriptions"] = doc.entity_descriptions;
  obj["author"] = {{"id", doc.author.id}, {"name", doc.author.name}, {"bio", doc.author.bio}};
  if (doc.gold_labels) obj["gold_labels"] = *doc.gold_labels;
  if (doc.weak_labels) obj["weak_labels"] = *doc.weak_labels;
  return obj;
}

/// Parses one corpus record. Throws DataError on schema violations.
inline Document parse_document(const std::string& line) {
  try {
    return detail::document_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(e.what());
  }
}

/// Reads newline-delimited JSON records. Blank lines are skipped.
inline Corpus read_corpus(std::istream& in, const std::string& provenance = {}) {
  Corpus corpus;
  corpus.provenance = provenance;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Document doc;
    try {
      doc = parse_document(line);
    } catch (const DataError& e) {
      throw DataError(provenance + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(doc.id).second) {
      throw DataError(provenance + ":" + std::to_string(line_no) + ": duplicate document id '" +
                      doc.id + "'");
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return read_corpus(in, path);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus.documents) out << to_json(doc).dump() << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  write_corpus(out, corpus);
}

struct CorpusSplit {
  Corpus train;
  Corpus valid;
  Corpus test;
};

/// Author-atomic split. Authors are visited in a seeded shuffle of their sorted ids and poured into
/// train, valid, test in turn; a split may overshoot its document budget by at most one author.
inline CorpusSplit split_user_disjoint(const Corpus& corpus, std::array<double, 3> fractions,
                                       std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!std::isfinite(f) || f < 0.0) throw UsageError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split fractions must sum to 1");

  std::map<std::string, std::size_t> docs_per_author;
  for (const auto& doc : corpus.documents) ++docs_per_author[doc.author.id];
  std::vector<std::string> authors;
  authors.reserve(docs_per_author.size());
  for (const auto& [id, n] : docs_per_author) authors.push_back(id);
  Rng rng(seed);
  rng.shuffle(authors);

  const double total = static_cast<double>(corpus.size());
  std::array<double, 3> budget{};
  for (int k = 0; k < 3; ++k) budget[k] = fractions[k] * total;
  std::array<double, 3> filled{};
  std::unordered_map<std::string, int> bucket;
  int k = 0;
  for (const auto& author : authors) {
    while (k < 2 && filled[k] >= budget[k]) ++k;
    bucket[author] = k;
    filled[k] += static_cast<double>(docs_per_author[author]);
  }

  CorpusSplit out;
  out.train.provenance = corpus.provenance + ".train";
  out.valid.provenance = corpus.provenance + ".valid";
  out.test.provenance = corpus.provenance + ".test";
  for (const auto& doc : corpus.documents) {
    switch (bucket.at(doc.author.id)) {
      case 0: out.train.documents.push_back(doc); break;
      case 1: out.valid.documents.push_back(doc); break;
      default: out.test.documents.push_back(doc); break;
    }
  }
  return out;
}

}  // namespace ctm
