#include <gtest/gtest.h>

#include <set>
#include <string>

#include "ctm/random.hpp"
#include "ctm/topic_space.hpp"

namespace ctm {
namespace {

TopicSpace three() { return register_topics({"Sports", "Music", "News"}); }

TEST(TopicSpace, IndicesFollowRegistrationOrder) {
  const auto space = three();
  EXPECT_EQ(space.size(), 3u);
  EXPECT_EQ(space.index("Music"), 1u);
  for (std::size_t i = 0; i < space.size(); ++i) EXPECT_EQ(space.index(space.name(i)), i);
}

TEST(TopicSpace, RejectsDuplicatesAndEmpty) {
  try {
    register_topics({"Sports", "Sports"});
    FAIL() << "expected duplicate rejection";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Sports"), std::string::npos);
  }
  EXPECT_THROW(register_topics({}), DataError);
}

TEST(TopicSpace, NamesAreByteExact) {
  const auto space = register_topics({"sports", "Sports"});
  EXPECT_EQ(space.size(), 2u);
  EXPECT_FALSE(space.contains("SPORTS"));
}

TEST(TopicSpace, ShippedTopicList) {
  // The appendix table prints 78 rows of 4 names.
  const auto space = load_topics(std::string(CTM_DATA_DIR) + "/topics.txt");
  EXPECT_EQ(space.size(), 312u);
  EXPECT_EQ(space.name(0), "2D animation");
  EXPECT_EQ(space.name(space.size() - 1), "Yoga");
  EXPECT_TRUE(space.contains("Anime & manga"));
  EXPECT_TRUE(space.contains("Cricket"));
}

TEST(EncodeLabels, MultiHot) {
  const auto space = three();
  EXPECT_EQ(encode_labels(std::set<std::string>{"Sports", "News"}, space), (LabelVector{1, 0, 1}));
  EXPECT_EQ(encode_labels(std::set<std::string>{}, space), (LabelVector{0, 0, 0}));
}

TEST(EncodeLabels, UnknownLabelNamed) {
  try {
    encode_labels(std::set<std::string>{"Jazz"}, three());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Jazz"), std::string::npos);
  }
}

TEST(EncodeLabels, DecodeInvertsAndPopcountMatches) {
  std::vector<std::string> names;
  for (int i = 0; i < 12; ++i) names.push_back("t" + std::to_string(i));
  const auto space = register_topics(names);
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::set<std::string> labels;
    for (const auto& n : names) {
      if (rng.bernoulli(0.3)) labels.insert(n);
    }
    const auto bits = encode_labels(labels, space);
    double popcount = 0;
    for (double b : bits) popcount += b;
    EXPECT_EQ(popcount, static_cast<double>(labels.size()));
    EXPECT_EQ(decode_labels(bits, space), labels);
  }
}

}  // namespace
}  // namespace ctm
