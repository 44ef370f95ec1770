#pragma once

// Builds the two encoder input strings per document: content (text plus link,
// media and entity cues) and author (display name plus bio).

#include <string>
#include <string_view>
#include <vector>

#include "ctm/corpus.hpp"
#include "ctm/text.hpp"

namespace ctm {

inline constexpr std::string_view kLinkToken = "[LINK]";
inline constexpr std::string_view kMediaToken = "[MEDIA]";
inline constexpr std::string_view kEntityToken = "[ENTITY]";
inline constexpr std::string_view kBioToken = "[BIO]";
inline constexpr std::size_t kLinkDescriptionScalars = 100;

/// Which Document fields feed the encoders. Text is always used.
struct FeatureToggles {
  bool use_links = true;
  bool use_media = true;
  bool use_entities = true;
  bool use_author = true;

  bool operator==(const FeatureToggles&) const = default;
};

inline bool is_url_token(std::string_view token) {
  return token.starts_with("http://") || token.starts_with("https://");
}

/// Case-folds, drops URL and @-mention tokens, and collapses whitespace.
inline std::string preprocess_text(std::string_view raw) {
  std::vector<std::string> kept;
  for (auto& token : text::split_whitespace(text::case_fold(raw))) {
    if (is_url_token(token) || token.front() == '@') continue;
    kept.push_back(std::move(token));
  }
  return text::join(kept);
}

inline std::string assemble_content_input(const Document& doc, const FeatureToggles& toggles = {}) {
  std::string out = preprocess_text(doc.text);
  auto append = [&out](std::string_view sep, std::string_view segment) {
    out += ' ';
    out += sep;
    out += ' ';
    out += segment;
  };
  if (toggles.use_links) {
    for (const auto& link : doc.hyperlinks) {
      // Truncate before folding so the limit applies to the source description.
      append(kLinkToken, preprocess_text(link.title) + " " +
                             preprocess_text(text::truncate_scalars(link.description,
                                                                    kLinkDescriptionScalars)));
    }
  }
  if (toggles.use_media) {
    for (const auto& annotation : doc.media_annotations) append(kMediaToken, preprocess_text(annotation));
  }
  if (toggles.use_entities) {
    for (const auto& description : doc.entity_descriptions) append(kEntityToken, preprocess_text(description));
  }
  return out;
}

/// `name [BIO] bio`, leaving out the separator when either side is empty.
inline std::string assemble_author_input(const Document& doc, const FeatureToggles& toggles = {}) {
  if (!toggles.use_author) return {};
  const std::string name = text::squeeze_spaces(text::case_fold(doc.author.name));
  const std::string bio = text::squeeze_spaces(text::case_fold(doc.author.bio));
  if (bio.empty()) return name;
  std::string out = name;
  if (!out.empty()) out += ' ';
  out += kBioToken;
  out += ' ';
  out += bio;
  return out;
}

}  // namespace ctm
