#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ddi/error.hpp"
#include "ddi/generator.hpp"
#include "ddi/roundtrip.hpp"
#include "ddi/tagging.hpp"

using namespace ddi;
using namespace ddi::tagging;

namespace {

Sentence adenocard_sentence() {
  Sentence s;
  s.id = "S1";
  s.text = "The use of Adenocard in patients receiving digitalis may be rarely associated with ventricular fibrillation.";
  s.mentions = {
      {"M1", MentionKind::Precipitant, {{43, 52}}, "digitalis"},
      {"M2", MentionKind::Trigger, {{67, 82}}, "associated with"},
      {"M3", MentionKind::SpecificInteraction, {{83, 107}}, "ventricular fibrillation"},
  };
  s.interactions = {{"I1", "M1", EffectLink{"M3"}}};
  return s;
}

std::vector<std::string> texts(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

std::vector<std::string> names(const std::vector<Tag>& tags) {
  std::vector<std::string> out;
  for (auto t : tags) out.emplace_back(to_string(t));
  return out;
}

// Valid IOB: every inside tag continues a run of its own type.
bool well_formed(const std::vector<Tag>& tags) {
  char open = 0;
  for (auto t : tags) {
    if (is_inside(t) && tag_type(t) != open) return false;
    open = tag_type(t);
  }
  return true;
}

const BindingContext kAdenocard{"Adenocard", {"adenosine"}, {}, false};

}  // namespace

TEST_CASE("tag names and indices") {
  CHECK(kTagCount == 11);
  for (std::size_t i = 0; i < kTagCount; ++i) CHECK(parse_tag(to_string(static_cast<Tag>(i))) == static_cast<Tag>(i));
  CHECK(to_string(Tag::B_K) == "B-K");
  CHECK(inside_tag('D') == Tag::I_D);
  CHECK_THROWS_AS(parse_tag("B-X"), ParseError);
}

TEST_CASE("tokenizer peels edge punctuation and keeps hyphens") {
  const auto toks = tokenize("(e.g., beta-blockers) reduce AUC.");
  CHECK(texts(toks) == std::vector<std::string>{"(", "e.g", ".", ",", "beta-blockers", ")", "reduce", "AUC", "."});
  CHECK(toks[4].span == Span{7, 20});
  CHECK(tokenize("  \t ").empty());
}

TEST_CASE("label drug binding prefers the longest alias") {
  BindingContext ctx{"Kaletra", {"lopinavir and ritonavir", "lopinavir"}, {}, false};
  const auto toks = bind_label_drug(tokenize("KALETRA and Lopinavir and ritonavir raise levels"), ctx);
  CHECK(texts(toks) == std::vector<std::string>{"LABELDRUG", "and", "LABELDRUG", "raise", "levels"});
  CHECK(toks[2].span == Span{12, 35});
  CHECK(toks[2].is_label_drug);

  SUBCASE("class proxies only when nothing else matched") {
    BindingContext proxy{"Zocor", {}, {"statins"}, true};
    CHECK(texts(bind_label_drug(tokenize("Avoid statins"), proxy))[1] == "LABELDRUG");
    CHECK(texts(bind_label_drug(tokenize("Zocor and statins"), proxy))[2] == "statins");
    proxy.use_class_proxies = false;
    CHECK(texts(bind_label_drug(tokenize("Avoid statins"), proxy))[1] == "statins");
  }
}

TEST_CASE("the adenocard sentence encodes to the expected tags") {
  const auto r = encode(adenocard_sentence(), kAdenocard);
  CHECK(texts(r.sequence.tokens) ==
        std::vector<std::string>{"The", "use", "of", "LABELDRUG", "in", "patients", "receiving", "digitalis", "may",
                                 "be", "rarely", "associated", "with", "ventricular", "fibrillation", "."});
  CHECK(names(r.sequence.tags) == std::vector<std::string>{"O", "O", "O", "O", "O", "O", "O", "B-D", "O", "O", "O",
                                                           "B-T", "I-T", "B-E", "I-E", "O"});
  CHECK(r.report.dropped.empty());
  REQUIRE(r.report.relations.size() == 1);
  CHECK(r.report.relations[0].effect.has_value());
}

TEST_CASE("encoder drops") {
  Sentence s;
  s.id = "S";
  SUBCASE("overlap keeps the longer mention") {
    s.text = "Avoid grapefruit juice.";
    s.mentions = {{"M1", MentionKind::Precipitant, {{6, 22}}, "grapefruit juice"},
                  {"M2", MentionKind::Precipitant, {{6, 16}}, "grapefruit"}};
    s.interactions = {{"I1", "M1", NoOutcome{}}, {"I2", "M2", NoOutcome{}}};
    const auto r = encode(s, {});
    REQUIRE(r.report.dropped.size() == 1);
    CHECK(r.report.dropped[0].mention_id == "M2");
    CHECK(r.report.dropped[0].reason == DropReason::Overlap);
    CHECK(names(r.sequence.tags) == std::vector<std::string>{"O", "B-U", "I-U", "O"});
  }
  SUBCASE("coordination merges only on request") {
    s.text = "Avoid CYP3A4 and CYP2D6 inhibitors.";
    s.mentions = {{"M1", MentionKind::Precipitant, {{6, 12}, {24, 34}}, "CYP3A4 inhibitors"},
                  {"M2", MentionKind::Precipitant, {{17, 34}}, "CYP2D6 inhibitors"}};
    s.interactions = {{"I1", "M1", NoOutcome{}}, {"I2", "M2", NoOutcome{}}};
    auto r = encode(s, {});
    REQUIRE(r.report.dropped.size() == 1);
    CHECK(r.report.dropped[0].reason == DropReason::Coordination);
    CHECK(names(r.sequence.tags) == std::vector<std::string>{"O", "O", "O", "B-U", "I-U", "O"});

    r = encode(s, {}, {.merge_coordination = true});
    CHECK(r.report.dropped.empty());
    REQUIRE(r.report.kept.size() == 1);
    CHECK(r.report.kept[0].spans == SpanList{{6, 34}});
    CHECK(r.report.kept[0].source_ids == std::vector<std::string>{"M2", "M1"});
    CHECK(r.report.relations.size() == 2);
  }
  SUBCASE("discontiguous without a partner") {
    s.text = "Avoid CYP3A4 strong inhibitors.";
    s.mentions = {{"M1", MentionKind::Precipitant, {{6, 12}, {20, 30}}, "CYP3A4 inhibitors"}};
    s.interactions = {{"I1", "M1", NoOutcome{}}};
    CHECK(encode(s, {}).report.dropped.at(0).reason == DropReason::Discontiguous);
  }
  SUBCASE("a precipitant with two interaction kinds keeps the first") {
    s.text = "Rifampin decreased exposure and caused hepatotoxicity.";
    s.mentions = {{"M1", MentionKind::Precipitant, {{0, 8}}, "Rifampin"},
                  {"M2", MentionKind::SpecificInteraction, {{39, 53}}, "hepatotoxicity"}};
    s.interactions = {{"I1", "M1", PkCode{"C54615"}}, {"I2", "M1", EffectLink{"M2"}}};
    const auto r = encode(s, {});
    REQUIRE(r.report.dropped.size() == 1);
    CHECK(r.report.dropped[0].reason == DropReason::MixedKind);
    CHECK(r.report.dropped[0].interaction_id == "I2");
    CHECK(r.sequence.tags[0] == Tag::B_K);
    REQUIRE(r.report.relations.size() == 1);
    CHECK(r.report.relations[0].code == std::optional<std::string>("C54615"));
  }
  SUBCASE("mentions off token boundaries and unlinked precipitants") {
    s.text = "Avoid ketoconazole-containing products.";
    s.mentions = {{"M1", MentionKind::Precipitant, {{6, 18}}, "ketoconazole"},
                  {"M2", MentionKind::Precipitant, {{30, 38}}, "products"}};
    s.interactions = {{"I1", "M1", NoOutcome{}}};
    const auto r = encode(s, {});
    REQUIRE(r.report.dropped.size() == 2);
    CHECK(r.report.dropped[0].reason == DropReason::TokenizationMismatch);
    CHECK(r.report.dropped[1].reason == DropReason::NoInteraction);
  }
}

TEST_CASE("repair canonicalizes orphan and mismatched inside tags") {
  std::vector<Tag> tags{Tag::I_D, Tag::I_D, Tag::O, Tag::B_T, Tag::I_E, Tag::I_E, Tag::B_K};
  const auto r = repair(tags);
  CHECK(names(r) == std::vector<std::string>{"B-D", "I-D", "O", "B-T", "B-E", "I-E", "B-K"});

  std::mt19937 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Tag> t(rng() % 12);
    for (auto& x : t) x = static_cast<Tag>(rng() % kTagCount);
    const auto once = repair(t);
    CHECK(well_formed(once));
    CHECK(repair(once) == once);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(tag_type(once[i]) == tag_type(t[i]));
    if (well_formed(t)) CHECK(once == t);
  }
}

TEST_CASE("decode recovers mentions and rejects mismatched lengths") {
  const auto s = adenocard_sentence();
  const auto r = encode(s, kAdenocard);
  const auto d = decode(r.sequence, s.text);
  REQUIRE(d.mentions.size() == 3);
  CHECK(d.mentions[0].mention.text == "digitalis");
  CHECK(d.mentions[0].interaction_kind == InteractionKind::PD);
  CHECK(d.mentions[1].mention.kind == MentionKind::Trigger);
  CHECK(d.mentions[2].mention.spans == SpanList{{83, 107}});

  auto bad = r.sequence;
  bad.tags.pop_back();
  CHECK_THROWS_AS(decode(bad, s.text), ShapeError);
}

TEST_CASE("entity binding collapses the argument mentions") {
  const auto s = adenocard_sentence();
  const auto toks = bind_label_drug(tokenize(s.text), kAdenocard);
  const auto b = entity_bind(toks, s.mentions[0], &s.mentions[2]);
  CHECK(texts(b) == std::vector<std::string>{"The", "use", "of", "LABELDRUG", "in", "patients", "receiving",
                                             "PRECIPITANT", "may", "be", "rarely", "associated", "with", "EFFECT",
                                             "."});
  CHECK(b[13].span == Span{83, 107});
  CHECK_THROWS_AS(entity_bind(toks, TokenRange{7, 8}, TokenRange{7, 9}), OffsetError);
  Mention off{"MX", MentionKind::Precipitant, {{44, 52}}, "igitalis"};
  CHECK_THROWS_AS(entity_bind(toks, off), OffsetError);
}

TEST_CASE("kept mentions survive encode then decode on generated text") {
  auto spec = corpus::default_generator_spec();
  spec.labels = 4;
  spec.overlap_rate = 0.2;
  spec.coordination_rate = 0.2;
  const auto c = corpus::generate_corpus(spec);
  std::size_t checked = 0;
  for (const auto& l : c.labels) {
    const auto ctx = binding_for(l);
    for (const auto& s : l.sentences) {
      const auto r = encode(s, ctx);
      const auto d = decode(r.sequence, s.text);
      REQUIRE(d.mentions.size() == r.report.kept.size());
      for (std::size_t i = 0; i < d.mentions.size(); ++i) {
        CHECK(d.mentions[i].mention.spans == r.report.kept[i].spans);
        CHECK(d.mentions[i].mention.kind == r.report.kept[i].kind);
        CHECK(d.mentions[i].interaction_kind == r.report.kept[i].interaction_kind);
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("round trip upper bound counts every drop") {
  auto spec = corpus::default_generator_spec();
  spec.labels = 6;
  spec.overlap_rate = 0.25;
  const auto gold = corpus::generate_corpus(spec);
  const auto r = roundtrip_upperbound(gold);
  std::size_t total = 0;
  for (const auto& [reason, n] : r.drop_counts) total += n;
  CHECK(total == r.dropped.size());
  CHECK(r.drop_counts.at(DropReason::Overlap) > 0);
  CHECK(r.scores.entity_primary.fp == 0);
  CHECK(r.scores.entity_primary.f1() < 1.0);
  CHECK(r.table().find("overlap") != std::string::npos);
}
