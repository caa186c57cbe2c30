#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ddi/corpus.hpp"
#include "ddi/error.hpp"

using namespace ddi;
using namespace ddi::corpus;

namespace {

const char* kAdenocard = R"({
  "version": "ddi-corpus/1",
  "provenance": "gold",
  "labels": [{
    "id": "L1", "drug": "Adenocard", "aliases": ["adenosine"],
    "sections": [{
      "name": "WARNINGS",
      "sentences": [{
        "id": "S1",
        "text": "The use of Adenocard in patients receiving digitalis may be rarely associated with ventricular fibrillation.",
        "mentions": [
          {"id": "M1", "kind": "Precipitant", "spans": [[43, 52]], "text": "digitalis"},
          {"id": "M2", "kind": "Trigger", "spans": [[67, 82]], "text": "associated with"},
          {"id": "M3", "kind": "SpecificInteraction", "spans": [[83, 107]], "text": "ventricular fibrillation"}
        ],
        "interactions": [{"id": "I1", "kind": "PD", "precipitant": "M1", "effect": "M3"}]
      }]
    }]
  }]
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("parse the adenocard file") {
  const auto c = parse_corpus(kAdenocard);
  REQUIRE(c.labels.size() == 1);
  CHECK(c.sentence_count() == 1);
  const auto& s = c.labels[0].sentences[0];
  CHECK(s.section == "WARNINGS");
  CHECK(s.mentions.size() == 3);
  REQUIRE(s.interactions.size() == 1);
  CHECK(s.interactions[0].kind() == InteractionKind::PD);
  CHECK(std::get<EffectLink>(s.interactions[0].outcome).effect_id == "M3");
  CHECK(c.labels[0].aliases == std::vector<std::string>{"adenosine"});
}

TEST_CASE("serialize is a fixed point after one parse") {
  const auto c = parse_corpus(kAdenocard);
  const auto text = serialize_corpus(c);
  CHECK(parse_corpus(text) == c);
  CHECK(serialize_corpus(parse_corpus(text)) == text);
}

TEST_CASE("malformed documents are rejected with a parse error") {
  CHECK_THROWS_AS(parse_corpus("{"), ParseError);
  CHECK_THROWS_AS(parse_corpus(replace(kAdenocard, "ddi-corpus/1", "ddi-corpus/9")), ParseError);
  CHECK_THROWS_AS(parse_corpus(replace(kAdenocard, "\"kind\": \"PD\"", "\"kind\": \"XX\"")), ParseError);
  CHECK_THROWS_AS(parse_corpus(replace(kAdenocard, "\"drug\": \"Adenocard\",", "\"drug\": \"Adenocard\", \"x\": 1,")),
                  ParseError);
  CHECK_THROWS_AS(parse_corpus(replace(kAdenocard, "[[43, 52]]", "[[43]]")), ParseError);
}

TEST_CASE("annotation errors surface as a validation error") {
  CHECK_THROWS_AS(parse_corpus(replace(kAdenocard, "\"text\": \"digitalis\"", "\"text\": \"digoxin\"")),
                  ValidationError);
  try {
    parse_corpus(replace(kAdenocard, "\"effect\": \"M3\"", "\"effect\": \"M2\""));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.violations().size() == 1);
    CHECK(e.violations()[0].find("expected SpecificInteraction") != std::string::npos);
  }
}

TEST_CASE("sentence ids are unique across the corpus") {
  auto c = parse_corpus(kAdenocard);
  c.labels.push_back(c.labels[0]);
  c.labels[1].id = "L2";
  CHECK_FALSE(validate(c, CodeVocabulary::placeholder()).empty());
}

TEST_CASE("coarse PK markers only in mapped corpora") {
  auto doc = replace(kAdenocard, R"({"id": "I1", "kind": "PD", "precipitant": "M1", "effect": "M3"})",
                     R"({"id": "I1", "kind": "PK", "precipitant": "M1", "code": "COARSE_DECREASE"})");
  CHECK_THROWS_AS(parse_corpus(doc), ValidationError);
  const auto c = parse_corpus(replace(doc, "\"gold\"", "\"mapped\""));
  CHECK(std::get<PkCode>(c.labels[0].sentences[0].interactions[0].outcome).code == "COARSE_DECREASE");
}

TEST_CASE("empty corpus round trips") {
  CorpusFile c;
  CHECK(parse_corpus(serialize_corpus(c)) == c);
}

TEST_CASE("embedding table") {
  const auto t = load_embeddings("2 3\naspirin 0.1 0.2 0.3\nwarfarin -1 0 1\n", 3, 7);
  CHECK(t.size() == 5);
  CHECK(t.find("aspirin") == std::size_t{0});
  CHECK(t.row(1)[0] == -1.0);
  const auto pad = *t.find(std::string(kPadToken));
  for (std::size_t k = 0; k < 3; ++k) CHECK(t.row(pad)[k] == 0.0);
  CHECK(t.find(std::string(kUnkToken)).has_value());
  CHECK(t.find(std::string(kLabelDrugToken)).has_value());

  CHECK_THROWS_AS(load_embeddings("1 3\naspirin 0.1 0.2\n", 3), ParseError);
  CHECK_THROWS_AS(load_embeddings("1 4\naspirin 0.1 0.2 0.3 0.4\n", 3), ParseError);
  CHECK_THROWS_AS(load_embeddings("2 1\na 1\na 2\n", 1), ParseError);
  CHECK_THROWS_AS(load_embeddings("1 1\na x\n", 1), ParseError);
  CHECK_THROWS_AS(load_embeddings("3 1\na 1\n", 1), ParseError);
}

TEST_CASE("coarse records map onto the corpus schema") {
  std::vector<Nlm180Record> recs(3);
  const std::string text = "Rifampin decreased the concentration of X, and aspirin may cause bleeding.";
  for (auto& r : recs) {
    r.label_id = "L1";
    r.drug = "X";
    r.section = "DRUG INTERACTIONS";
    r.sentence_id = "S1";
    r.text = text;
  }
  recs[0].precipitant = {{0, 8}};
  recs[0].trigger = {{9, 18}};
  recs[0].kind = InteractionKind::PK;
  recs[0].direction = Direction::Decrease;
  recs[1].precipitant = {{47, 54}};
  recs[1].trigger = {{65, 73}};
  recs[1].kind = InteractionKind::PD;
  recs[2].precipitant = {{47, 54}};
  recs[2].kind = InteractionKind::PD;  // no trigger: skipped with a warning

  SUBCASE("serialize and parse round trip") {
    const auto back = parse_nlm180(serialize_nlm180(recs));
    REQUIRE(back.size() == 3);
    CHECK(back[0].direction == Direction::Decrease);
    CHECK(back[1].trigger == SpanList{{65, 73}});
  }
  SUBCASE("mapping") {
    const auto r = map_nlm180(recs);
    CHECK(r.warnings.size() == 1);
    CHECK(r.corpus.provenance == Provenance::Mapped);
    const auto& s = r.corpus.labels.at(0).sentences.at(0);
    REQUIRE(s.interactions.size() == 2);
    CHECK(std::get<PkCode>(s.interactions[0].outcome).code == "COARSE_DECREASE");
    const auto* effect = s.find_mention(std::get<EffectLink>(s.interactions[1].outcome).effect_id);
    REQUIRE(effect);
    CHECK(effect->kind == MentionKind::SpecificInteraction);
    CHECK(effect->text == "bleeding");
    CHECK(validate(r.corpus, CodeVocabulary::placeholder()).empty());
  }
  SUBCASE("PK records need a direction") {
    recs[0].direction.reset();
    CHECK_THROWS_AS(parse_nlm180(serialize_nlm180(recs)), ParseError);
  }
}
