#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ddi/error.hpp"
#include "ddi/generator.hpp"
#include "ddi/infer.hpp"
#include "ddi/train.hpp"
#include "support.hpp"

using namespace ddi;
using namespace ddi::infer;

namespace {

Sentence coordinated() {
  Sentence s;
  s.id = "S1";
  s.text = "Avoid CYP3A4, CYP2D6 and CYP2C9 inhibitors with strong other agents.";
  s.mentions = {{"M1", MentionKind::Precipitant, {{6, 42}}, "CYP3A4, CYP2D6 and CYP2C9 inhibitors"},
                {"M2", MentionKind::Precipitant, {{48, 67}}, "strong other agents"},
                {"M3", MentionKind::Trigger, {{0, 5}}, "Avoid"}};
  s.interactions = {{"I1", "M1", NoOutcome{}}, {"I2", "M2", NoOutcome{}}};
  return s;
}

std::vector<std::string> mention_texts(const Sentence& s) {
  std::vector<std::string> out;
  for (const auto& m : s.mentions) out.push_back(m.text);
  return out;
}

}  // namespace

TEST_CASE("leading modifiers are stripped") {
  Sentence s;
  s.id = "S";
  s.text = "Avoid strong CYP3A4 inhibitors and potent ones.";
  s.mentions = {{"M1", MentionKind::Precipitant, {{6, 30}}, "strong CYP3A4 inhibitors"},
                {"M2", MentionKind::Precipitant, {{35, 41}}, "potent"}};
  s.interactions = {{"I1", "M1", NoOutcome{}}, {"I2", "M2", NoOutcome{}}};
  const auto st = apply_post_rules(s, {});
  CHECK(st.stripped == 1);
  CHECK(st.emptied == 1);
  CHECK(st.interactions_dropped == 1);
  REQUIRE(s.mentions.size() == 1);
  CHECK(s.mentions[0].spans == SpanList{{13, 30}});
  CHECK(s.mentions[0].text == "CYP3A4 inhibitors");
  CHECK(validate(s, CodeVocabulary::placeholder()).empty());
}

TEST_CASE("generic precipitants are purged and coordination splits on request") {
  SUBCASE("coordination off") {
    auto s = coordinated();
    const auto st = apply_post_rules(s, {});
    CHECK(st.purged == 1);
    CHECK(st.split == 0);
    CHECK(mention_texts(s) == std::vector<std::string>{"CYP3A4, CYP2D6 and CYP2C9 inhibitors", "Avoid"});
    REQUIRE(s.interactions.size() == 1);
    CHECK(s.interactions[0].precipitant_id == "M1");
  }
  SUBCASE("coordination on") {
    auto s = coordinated();
    InferConfig cfg;
    cfg.coordination = true;
    const auto st = apply_post_rules(s, cfg);
    CHECK(st.split == 1);
    CHECK(mention_texts(s) ==
          std::vector<std::string>{"CYP3A4 inhibitors", "CYP2D6 inhibitors", "CYP2C9 inhibitors", "Avoid"});
    CHECK(s.mentions[0].spans == SpanList{{6, 12}, {32, 42}});
    CHECK(s.mentions[2].spans == SpanList{{25, 42}});
    REQUIRE(s.interactions.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s.interactions[i].id == "I" + std::to_string(i + 1));
      CHECK(s.interactions[i].precipitant_id == "M" + std::to_string(i + 1));
    }
    CHECK(validate(s, CodeVocabulary::placeholder()).empty());
  }
}

TEST_CASE("post rules are idempotent") {
  InferConfig cfg;
  cfg.coordination = true;
  auto once = coordinated();
  apply_post_rules(once, cfg);
  auto twice = once;
  const auto st = apply_post_rules(twice, cfg);
  CHECK(twice == once);
  CHECK(st.stripped + st.emptied + st.purged + st.split + st.interactions_dropped == 0);
}

TEST_CASE("coordination split leaves other shapes alone") {
  const std::vector<std::string> heads{"inhibitors"};
  const std::string text = "Avoid CYP3A4 inhibitors and grapefruit juice, or strong inducers.";
  Mention plain{"M1", MentionKind::Precipitant, {{6, 23}}, "CYP3A4 inhibitors"};
  CHECK(split_coordination(plain, text, heads).size() == 1);
  Mention no_head{"M2", MentionKind::Precipitant, {{6, 44}}, "CYP3A4 inhibitors and grapefruit juice"};
  CHECK(split_coordination(no_head, text, heads).size() == 1);
  const std::string oxford = "Avoid A, B, and C inhibitors.";
  Mention m{"M3", MentionKind::Precipitant, {{6, 28}}, "A, B, and C inhibitors"};
  CHECK(split_coordination(m, oxford, heads).size() == 3);
}

TEST_CASE("configuration lists") {
  InferConfig c;
  c.modifiers = {"Strong", "strong", "POTENT"};
  CHECK_THROWS_AS(c.check(), UsageError);
  c.normalize();
  CHECK(c.modifiers == std::vector<std::string>{"strong", "potent"});
  c.check();
  c.pd_threshold = 1.0;
  CHECK_THROWS_AS(c.check(), UsageError);
}

TEST_CASE("prediction keeps the skeleton and yields valid annotations") {
  auto spec = corpus::default_generator_spec();
  spec.labels = 2;
  spec.sentences_per_label = 6;
  const auto gold = corpus::generate_corpus(spec);
  std::vector<train::WeightedCorpus> wc{{&gold, tagging::WeightClass::Primary}};
  auto mc = testing::micro_config();
  mc.dropout = 0.5;
  auto m = train::build_model(wc, mc, CodeVocabulary::placeholder(), 4);
  PostRuleStats st;
  const auto pred = predict_corpus(m, gold, {}, &st);
  CHECK(pred.provenance == Provenance::Predicted);
  CHECK(skeleton(pred) == skeleton(gold));
  CHECK(validate(pred, CodeVocabulary::placeholder()).empty());
  CHECK(corpus::serialize_corpus(predict_corpus(m, gold, {})) == corpus::serialize_corpus(pred));

  const auto sk = skeleton(gold);
  for (const auto& l : sk.labels)
    for (const auto& s : l.sentences) {
      CHECK(s.mentions.empty());
      CHECK(s.interactions.empty());
    }
}

TEST_CASE("sentences longer than n are tagged in windows") {
  auto m = testing::micro_model();
  Sentence s;
  s.id = "S";
  s.text = "abc with xyz may abc with xyz may abc with xyz";
  // Bias every token toward B-T so each of the 12 tokens must come back as
  // its own trigger, whichever window tagged it.
  m.params().get("ner.out.b").value[static_cast<std::size_t>(tagging::Tag::B_T)] = 50.0;
  const auto out = predict_sentence(m, s, {}, {});
  CHECK(out.text == s.text);
  CHECK(validate(out, CodeVocabulary::placeholder()).empty());
  const auto toks = tagging::tokenize(s.text);
  REQUIRE(out.mentions.size() == toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i) {
    CHECK(out.mentions[i].kind == MentionKind::Trigger);
    CHECK(out.mentions[i].spans == SpanList{toks[i].span});
  }
}
