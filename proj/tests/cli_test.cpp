// Drives the ctm executable end to end through its file interfaces.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ctm/ctm.hpp"

namespace ctm {
namespace {

namespace fs = std::filesystem;

const std::string kCli = CTM_CLI;
const std::string kData = CTM_DATA_DIR;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ctm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >" + path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return slurp(path("stderr.txt")); }
  std::string stdout_text() const { return slurp(path("stdout.txt")); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static void write(const std::string& p, const std::string& content) { std::ofstream(p, std::ios::binary) << content; }

  fs::path dir_;
};

TEST_F(CliTest, WeakLabelPartitionsAndIsIdempotent) {
  const std::string args = "weak-label --topics " + kData + "/topics.txt --rules " + kData + "/rules.txt --corpus " +
                           kData + "/demo.jsonl --topical-out " + path("top.jsonl") + " --chatter-out " +
                           path("cht.jsonl");
  ASSERT_EQ(run(args), 0) << stderr_text();
  const auto topical = load_corpus(path("top.jsonl"));
  const auto chatter = load_corpus(path("cht.jsonl"));
  EXPECT_EQ(topical.size() + chatter.size(), 4u);
  EXPECT_EQ(chatter.size(), 1u);
  const auto first = slurp(path("top.jsonl")) + slurp(path("cht.jsonl"));
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(slurp(path("top.jsonl")) + slurp(path("cht.jsonl")), first);
}

TEST_F(CliTest, MissingRulesFileIsADataError) {
  const int code = run("weak-label --topics " + kData + "/topics.txt --rules " + path("nope.txt") + " --corpus " +
                       kData + "/demo.jsonl --topical-out " + path("a") + " --chatter-out " + path("b"));
  EXPECT_EQ(code, 2);
  EXPECT_NE(stderr_text().find(path("nope.txt")), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run("train --bogus"), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("split --corpus " + kData + "/demo.jsonl --fractions 0.5,0.5,0.5"), 1);
}

TEST_F(CliTest, SplitWritesThreeFiles) {
  ASSERT_EQ(run("split --corpus " + kData + "/demo.jsonl --fractions 0.5,0.25,0.25 --seed 7 --out-prefix " +
                path("demo")),
            0)
      << stderr_text();
  std::size_t total = 0;
  for (const char* suffix : {".train", ".valid", ".test"}) total += load_corpus(path("demo") + suffix).size();
  EXPECT_EQ(total, 4u);
}

TEST_F(CliTest, TrainIsDeterministicAndChecksInit) {
  ASSERT_EQ(run("synth --out-dir " + path("syn") + " --documents 200 --chatter-documents 40 --topics 4"), 0)
      << stderr_text();
  const std::string base = "train --topics " + path("syn/topics.txt") + " --corpus " + path("syn/labelled.jsonl") +
                           " --chatter " + path("syn/chatter.jsonl") + " --dim 4096 --seed 3 --out ";
  ASSERT_EQ(run(base + path("m1.txt")), 0) << stderr_text();
  ASSERT_EQ(run(base + path("m2.txt")), 0);
  EXPECT_EQ(slurp(path("m1.txt")), slurp(path("m2.txt")));

  // Fine-tuning from a model with a different dim is rejected.
  EXPECT_EQ(run("train --topics " + path("syn/topics.txt") + " --corpus " + path("syn/labelled.jsonl") +
                " --dim 2048 --init " + path("m1.txt") + " --out " + path("m3.txt")),
            2);
  EXPECT_NE(stderr_text().find("dim"), std::string::npos);

  // Weak-label pretraining then gold fine-tuning.
  ASSERT_EQ(run("weak-label --topics " + path("syn/topics.txt") + " --rules " + path("syn/rules.txt") + " --corpus " +
                path("syn/labelled.jsonl") + " --topical-out " + path("wld.jsonl") + " --chatter-out " +
                path("cht.jsonl")),
            0);
  ASSERT_EQ(run("train --labels weak --topics " + path("syn/topics.txt") + " --corpus " + path("wld.jsonl") +
                " --chatter " + path("cht.jsonl") + " --dim 4096 --epochs 2 --out " + path("pre.txt")),
            0)
      << stderr_text();
  ASSERT_EQ(run("train --topics " + path("syn/topics.txt") + " --corpus " + path("syn/labelled.jsonl") +
                " --dim 4096 --init " + path("pre.txt") + " --out " + path("tuned.txt")),
            0)
      << stderr_text();
}

/// Model whose combined probabilities are exactly (sigmoid of) the given logits for any document.
void write_bias_model(const std::string& p, const std::vector<std::string>& topics, const LabelVector& probs) {
  LinearDualModel m(TopicSpace(topics), 64);
  for (std::size_t t = 0; t < probs.size(); ++t) m.content.bias()[t] = std::log(probs[t] / (1.0 - probs[t]));
  save_model(p, m);
}

TEST_F(CliTest, PredictCalibratesAndPassesThrough) {
  write_bias_model(path("m.txt"), {"Sports", "Cricket", "Music"}, {0.3, 0.9, 0.6});
  write(path("c.txt"), "includes Sports Cricket\n");
  ASSERT_EQ(run("predict --model " + path("m.txt") + " --corpus " + kData + "/demo.jsonl --constraints " +
                path("c.txt") + " --threads 3 --out " + path("p.jsonl")),
            0)
      << stderr_text();
  const auto recs = load_predictions(path("p.jsonl"));
  ASSERT_EQ(recs.size(), 4u);
  for (const auto& r : recs) {
    EXPECT_NEAR(r.calibrated[0], 0.987273, 1e-6);
    EXPECT_NEAR(r.calibrated[1], 0.981818, 1e-6);
    EXPECT_EQ(r.calibrated[2], r.combined[2]);
  }

  ASSERT_EQ(run("predict --model " + path("m.txt") + " --corpus " + kData + "/demo.jsonl --constraints " +
                path("c.txt") + " --no-constraints --out " + path("q.jsonl")),
            0);
  std::ifstream in(path("q.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["combined"].dump(), j["calibrated"].dump());
  }
}

TEST_F(CliTest, PredictRejectsMismatchedTopicsAndHandlesEmptyCorpus) {
  write_bias_model(path("m.txt"), {"Sports", "Cricket"}, {0.3, 0.9});
  write(path("c.txt"), "includes Sports Music\n");
  EXPECT_EQ(run("predict --model " + path("m.txt") + " --corpus " + kData + "/demo.jsonl --constraints " +
                path("c.txt") + " --out " + path("p.jsonl")),
            2);
  EXPECT_EQ(run("predict --model " + path("m.txt") + " --corpus " + kData + "/demo.jsonl --topics " + kData +
                "/topics.txt --out " + path("p.jsonl")),
            2);
  write(path("empty.jsonl"), "");
  ASSERT_EQ(run("predict --model " + path("m.txt") + " --corpus " + path("empty.jsonl") + " --out " + path("e.jsonl")),
            0);
  EXPECT_EQ(slurp(path("e.jsonl")), "");
}

TEST_F(CliTest, EvaluateReports) {
  write(path("topics.txt"), "Sports\nCricket\n");
  write(path("gold.jsonl"),
        R"({"id":"1","text":"a","author":{"id":"u"},"gold_labels":["Sports","Cricket"]})" "\n"
        R"({"id":"2","text":"b","author":{"id":"v"},"gold_labels":[]})" "\n");
  write(path("pred.jsonl"),
        R"({"id":"1","combined":[0.4,0.95],"calibrated":[0.97,0.95],"converged":true})" "\n"
        R"({"id":"2","combined":[0.1,0.2],"calibrated":[0.1,0.2],"converged":true})" "\n");
  write(path("chatter.jsonl"), R"({"id":"c","combined":[0.0,0.0],"calibrated":[0.0,0.0]})" "\n");
  write(path("c.txt"), "includes Sports Cricket\n");
  const std::string base = "evaluate --topics " + path("topics.txt") + " --predictions " + path("pred.jsonl") +
                           " --gold " + path("gold.jsonl") + " --chatter-predictions " + path("chatter.jsonl") +
                           " --constraints " + path("c.txt") + " --out " + path("r.json") + " --table " +
                           path("ap.tsv");
  ASSERT_EQ(run(base + " --field combined"), 0) << stderr_text();
  auto report = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(report["chatter_count"], 0);
  EXPECT_EQ(report["violations"]["inclusion"], 1);
  EXPECT_EQ(report["median_aps"], 1.0);
  EXPECT_NE(stdout_text().find("median APS (x100): 100.00"), std::string::npos) << stdout_text();
  ASSERT_EQ(run(base), 0);
  report = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(report["violations"]["inclusion"], 0);
  EXPECT_EQ(slurp(path("ap.tsv")), "topic\tap\nSports\t1.0\nCricket\t1.0\n");

  write(path("nopos.jsonl"),
        R"({"id":"1","text":"a","author":{"id":"u"},"gold_labels":[]})" "\n"
        R"({"id":"2","text":"b","author":{"id":"v"},"gold_labels":[]})" "\n");
  EXPECT_EQ(run("evaluate --topics " + path("topics.txt") + " --predictions " + path("pred.jsonl") + " --gold " +
                path("nopos.jsonl")),
            2);
}

}  // namespace
}  // namespace ctm
