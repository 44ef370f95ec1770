#include <gtest/gtest.h>

#include <string>

#include "ctm/features.hpp"
#include "ctm/random.hpp"

namespace ctm {
namespace {

Document base(const std::string& text) {
  Document d;
  d.id = "1";
  d.text = text;
  d.author.id = "a";
  return d;
}

TEST(PreprocessText, Examples) {
  EXPECT_EQ(preprocess_text("Check this https://t.co/xyz @user GREAT Game"), "check this great game");
  EXPECT_EQ(preprocess_text(""), "");
  EXPECT_EQ(preprocess_text("#YellowStorm POWER"), "#yellowstorm power");
  EXPECT_EQ(preprocess_text("  HTTP://X.Y  spaced\t\nout  "), "spaced out");
}

TEST(PreprocessText, FoldsNonAscii) { EXPECT_EQ(preprocess_text("ÉCOLE Ünïcode ΣΟΦΙΑ"), "école ünïcode σοφια"); }

TEST(PreprocessText, Idempotent) {
  const std::string alphabet = "aB @#:/.htps ÉΣ\t";
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const auto n = rng.uniform_index(40);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.1)) {
        s += "https://";
      } else {
        s += alphabet[rng.uniform_index(alphabet.size())];
      }
    }
    const auto once = preprocess_text(s);
    EXPECT_EQ(preprocess_text(once), once) << s;
  }
}

TEST(AssembleContent, MediaExample) {
  auto d = base("Power hitter joins #yellowstorm");
  d.media_annotations = {"Cricket"};
  EXPECT_EQ(assemble_content_input(d), "power hitter joins #yellowstorm [MEDIA] cricket");
}

TEST(AssembleContent, EntitySuffix) {
  auto d = base("What a knock from Steve Waugh");
  d.entity_descriptions = {"Australian cricketer"};
  const auto out = assemble_content_input(d);
  EXPECT_TRUE(out.ends_with(" [ENTITY] australian cricketer")) << out;
}

TEST(AssembleContent, IdentityWithoutExtras) {
  const auto d = base("Just TEXT @here");
  EXPECT_EQ(assemble_content_input(d), preprocess_text(d.text));
}

TEST(AssembleContent, OrderAndTruncation) {
  auto d = base("t");
  d.entity_descriptions = {"E1"};
  d.media_annotations = {"M1", "M2"};
  d.hyperlinks = {{"https://a", "Title A", std::string(150, 'D')}, {"https://b", "B", "short"}};
  const auto out = assemble_content_input(d);
  EXPECT_EQ(out, "t [LINK] title a " + std::string(100, 'd') + " [LINK] b short [MEDIA] m1 [MEDIA] m2 [ENTITY] e1");
}

TEST(AssembleContent, TruncationCountsScalarValues) {
  auto d = base("");
  std::string desc;
  for (int i = 0; i < 120; ++i) desc += "é";
  d.hyperlinks = {{"", "", desc}};
  const auto out = assemble_content_input(d);
  std::string expected;
  for (int i = 0; i < 100; ++i) expected += "é";
  EXPECT_TRUE(out.ends_with(expected));
  EXPECT_FALSE(out.ends_with("é" + expected));
}

TEST(AssembleContent, TogglesDropFields) {
  auto d = base("text");
  d.hyperlinks = {{"u", "title", "desc"}};
  d.media_annotations = {"Cricket"};
  d.entity_descriptions = {"entity"};
  FeatureToggles off{false, false, false, false};
  EXPECT_EQ(assemble_content_input(d, off), "text");
  EXPECT_EQ(assemble_content_input(d, {true, false, false, true}), "text [LINK] title desc");
}

TEST(AssembleContent, NoUrlsOrMentionsAnywhere) {
  auto d = base("hi @x");
  d.hyperlinks = {{"https://u", "see https://z.com", "by @bob"}};
  d.entity_descriptions = {"@handle http://q"};
  const auto out = assemble_content_input(d);
  EXPECT_EQ(out.find("http"), std::string::npos);
  EXPECT_EQ(out.find('@'), std::string::npos);
}

TEST(AssembleAuthor, Examples) {
  auto d = base("");
  d.author.name = "FashionNews Daily";
  d.author.bio = "latest fashion trends";
  EXPECT_EQ(assemble_author_input(d), "fashionnews daily [BIO] latest fashion trends");
  d.author.name = d.author.bio = "";
  EXPECT_EQ(assemble_author_input(d), "");
  d.author.name = "CNN";
  EXPECT_EQ(assemble_author_input(d), "cnn");
  d.author.name = "";
  d.author.bio = "News";
  EXPECT_EQ(assemble_author_input(d), "[BIO] news");
  d.author.name = "CNN";
  EXPECT_EQ(assemble_author_input(d, {true, true, true, false}), "");
}

}  // namespace
}  // namespace ctm
