// Copyright 2026 The smab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "smab/attack.hpp"

namespace smab {
namespace {

SensitivityReport report_of(const std::map<std::string, double>& g) {
  SensitivityReport r;
  for (const auto& [w, v] : g) r.words[w] = {v, 1, v};
  return r;
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

// Hides fill_joint so callers fall back to one mask at a time.
class SequentialOnly final : public Perturber {
 public:
  explicit SequentialOnly(Perturber& inner) : inner_(inner) {}
  std::vector<Candidate> fill_mask(const MaskQuery& q) override {
    ++calls;
    return inner_.fill_mask(q);
  }
  OracleInfo info() override { return inner_.info(); }
  int calls = 0;

 private:
  Perturber& inner_;
};

TEST(TopSensitiveWords, Ranking) {
  const auto report = report_of({{"good", 0.9}, {"film", 0.2}, {"plot", 0.5}});
  const PreprocessConfig cfg;
  EXPECT_EQ(top_sensitive_words(report, "a good film", 2, cfg),
            (std::vector<ScoredWord>{{"good", 0.9}, {"film", 0.2}}));
  EXPECT_EQ(top_sensitive_words(report, "a good film", 5, cfg).size(), 2u);
  EXPECT_EQ(top_sensitive_words(report, "just film film", 2, cfg), (std::vector<ScoredWord>{{"film", 0.2}}));
  try {
    top_sensitive_words(report, "nothing known here", 2, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoIndexedWords);
  }
}

TEST(TopSensitiveWords, TiesAreLexicographic) {
  const auto report = report_of({{"zeta", 0.4}, {"alpha", 0.4}, {"mid", 0.4}, {"top", 0.8}});
  const auto got = top_sensitive_words(report, "zeta mid alpha top", 4, PreprocessConfig{});
  EXPECT_EQ(got, (std::vector<ScoredWord>{{"top", 0.8}, {"alpha", 0.4}, {"mid", 0.4}, {"zeta", 0.4}}));
}

TEST(RenderInstruction, BaselinesUnchanged) {
  for (const char* id : {"W1", "W2", "W3"}) {
    EXPECT_EQ(render_instruction(id, {{"any", 0.5}}), std::string(find_template(id).text));
    EXPECT_EQ(render_instruction(id, {}), std::string(find_template(id).text));
  }
  EXPECT_EQ(render_instruction("W1", {}), "Replace at most two words in the sentence with synonyms.");
}

TEST(RenderInstruction, WordFrame) {
  const auto out = render_instruction("W5", {{"make", 0.7}, {"film", 0.6}});
  EXPECT_EQ(out.rfind("The words \"make\" and \"film\" are highly sensitive", 0), 0u) << out;
  EXPECT_NE(out.find("perturbing either \"make\", \"film\", or both"), std::string::npos) << out;
  EXPECT_EQ(out.find("[Word"), std::string::npos);
  EXPECT_EQ(out.find("0.7"), std::string::npos);
}

TEST(RenderInstruction, WithSensitivityValues) {
  const auto out = render_instruction("W4", {{"characters", 0.9865988772394045}, {"people", 0.968535617081986}});
  EXPECT_NE(out.find("[\"characters\", \"people\"]"), std::string::npos) << out;
  EXPECT_NE(out.find("[0.9865988772394045, 0.968535617081986]"), std::string::npos) << out;
  EXPECT_EQ(count_of(out, "characters"), 1u);
  EXPECT_EQ(count_of(out, "0.9865988772394045"), 1u);
  EXPECT_EQ(count_of(out, "GS1"), 0u);
  EXPECT_EQ(count_of(out, "GS2"), 0u);
}

TEST(RenderInstruction, SingleWordIsDuplicated) {
  const auto out = render_instruction("W6", {{"affecting", 0.8}});
  EXPECT_EQ(out, "Add at most two semantically close words to the sentence, replacing the words \"affecting\" or "
                 "\"affecting\", or both.");
}

TEST(RenderInstruction, NoResidualPlaceholders) {
  const std::vector<ScoredWord> words{{"GS2", 0.5}, {"[Word1]x", 0.25}};  // hostile words
  for (const auto& t : kInstructionTemplates) {
    const auto out = render_instruction(t.id, {{"alpha", 0.5}, {"beta", 0.25}});
    EXPECT_EQ(out.find("[Word1]"), std::string::npos);
    EXPECT_EQ(out.find("[Word2]"), std::string::npos);
    EXPECT_EQ(out.find("GS1"), std::string::npos);
    EXPECT_EQ(out.find("GS2"), std::string::npos);
  }
  // substituted words are not re-scanned for placeholders
  EXPECT_NE(render_instruction("W4", words).find("\"GS2\""), std::string::npos);
}

TEST(RenderInstruction, Errors) {
  try {
    render_instruction("W9", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnknownTemplate);
  }
  EXPECT_THROW(render_instruction("W4", {}), Error);
}

TEST(Keyphrases, JsonShapes) {
  const auto a = keyphrases_from_json(nlohmann::json::parse(R"([["dull", "plot"], ["cast"]])"));
  const auto b = keyphrases_from_json(nlohmann::json::parse(R"(["dull plot", "cast"])"));
  EXPECT_EQ(a.phrases, b.phrases);
  EXPECT_EQ(a.total_words(), 3u);
  EXPECT_THROW(keyphrases_from_json(nlohmann::json::parse(R"({"a": 1})")), Error);
  EXPECT_THROW(keyphrases_from_json(nlohmann::json::parse(R"([3])")), Error);
}

TEST(MaskKeyphrase, MasksJointly) {
  const auto m = mask_keyphrase("The plot, the DULL plot.", {"dull", "plot"});
  EXPECT_EQ(m.text, "The [MASK], the [MASK] plot.");
  EXPECT_EQ(m.originals, (std::vector<std::string>{"plot", "DULL"}));
  EXPECT_EQ(m.assemble(m.originals), "The plot, the DULL plot.");
  EXPECT_TRUE(mask_keyphrase("no match", {"plot"}).originals.empty());
}

TEST(TextSensitivity, FourFlipsInTen) {
  SyntheticLexiconClassifier clf({"pos", "neg"}, "pos", {{"awful", 1.0}, {"bad", 1.0}, {"poor", 1.0}, {"weak", 1.0}});
  ScriptedPerturber p({{"plot", {"story", "awful", "tale", "bad", "arc", "poor", "line", "weak", "yarn", "saga"}}});
  KeyphraseSet kp{{{"plot"}}};
  EXPECT_DOUBLE_EQ(text_sensitivity("a dull plot", kp, p, clf, 10), (4.0 / 10.0) / 1.0);
  EXPECT_DOUBLE_EQ(text_sensitivity("a dull plot", kp, p, clf, 10), 0.4);
}

TEST(TextSensitivity, ZeroCases) {
  SyntheticLexiconClassifier clf({"pos", "neg"}, "pos", {});
  ScriptedPerturber p({{"plot", {"story", "tale"}}});
  EXPECT_EQ(text_sensitivity("a dull plot", KeyphraseSet{{{"plot"}}}, p, clf), 0.0);
  EXPECT_EQ(text_sensitivity("a dull plot", KeyphraseSet{}, p, clf), 0.0);
}

TEST(TextSensitivity, SequentialFallbackAgreesWithJointFill) {
  SyntheticLexiconClassifier clf({"pos", "neg"}, "pos", {{"awful", 0.5}, {"mess", 0.5}});
  ScriptedPerturber p({{"dull", {"awful", "slow", "awful"}}, {"plot", {"mess", "mess", "tale"}}, {"cast", {"crew"}}});
  SequentialOnly seq(p);
  const KeyphraseSet kp{{{"dull", "plot"}, {"cast"}}};
  const std::string input = "a dull plot and a fine cast";
  // pairs: (awful, mess) flips, (slow, mess) no, (awful, tale) no -> 1/3; cast -> crew no flip
  const double expected = (1.0 / 3.0 + 0.0) / 3.0;
  EXPECT_NEAR(text_sensitivity(input, kp, p, clf, 3), expected, 1e-15);
  EXPECT_NEAR(text_sensitivity(input, kp, seq, clf, 3), expected, 1e-15);
  EXPECT_GT(seq.calls, 0);
}

TEST(SensitivityReward, Values) {
  EXPECT_DOUBLE_EQ(sensitivity_reward(0.4, 0.1, 0.25), 0.25 * (0.4 - 0.1));
  EXPECT_NEAR(sensitivity_reward(0.4, 0.1), 0.075, 1e-15);
  EXPECT_EQ(sensitivity_reward(0.3, 0.3), 0.0);
  EXPECT_LT(sensitivity_reward(0.1, 0.6), 0.0);
  for (double alpha : {0.0, 1.0, -0.2}) EXPECT_THROW(sensitivity_reward(0.4, 0.1, alpha), Error);
}

}  // namespace
}  // namespace smab
