#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "ddi/corpus.hpp"
#include "ddi/error.hpp"
#include "ddi/generator.hpp"
#include "ddi/roundtrip.hpp"

using namespace ddi;
using namespace ddi::corpus;

TEST_CASE("default corpus statistics track the requested mixtures") {
  const auto spec = default_generator_spec();
  const auto c = generate_corpus(spec);
  const auto st = corpus_stats(c);
  CHECK(st.sentences == spec.labels * spec.sentences_per_label);
  CHECK(st.annotated_proportion() == doctest::Approx(spec.annotated_proportion).epsilon(0.05));
  const auto mm = st.mention_mixture();
  const auto im = st.interaction_mixture();
  for (int k = 0; k < 3; ++k) {
    CAPTURE(k);
    CHECK(std::abs(mm[k] - spec.mention_mixture[k]) < 0.05);
    CHECK(std::abs(im[k] - spec.interaction_mixture[k]) < 0.05);
  }
  CHECK(st.mean_words() >= static_cast<double>(spec.min_words));
  CHECK(st.mean_words() <= static_cast<double>(spec.max_words));
  CHECK(validate(c, CodeVocabulary::placeholder()).empty());
}

TEST_CASE("generation is a pure function of the seed") {
  auto spec = default_generator_spec();
  spec.labels = 3;
  const auto a = generate_corpus(spec);
  CHECK(serialize_corpus(a) == serialize_corpus(generate_corpus(spec)));
  spec.seed = 2;
  CHECK(serialize_corpus(a) != serialize_corpus(generate_corpus(spec)));
  CHECK(a.metadata.seed == std::uint64_t{1});
}

TEST_CASE("generated corpora survive a serialize and parse cycle") {
  auto spec = default_generator_spec();
  spec.labels = 4;
  spec.overlap_rate = 0.2;
  spec.coordination_rate = 0.2;
  const auto c = generate_corpus(spec);
  CHECK(parse_corpus(serialize_corpus(c)) == c);
}

TEST_CASE("injections are recorded and reference real mentions") {
  auto spec = default_generator_spec();
  spec.labels = 6;
  spec.overlap_rate = 0.3;
  spec.coordination_rate = 0.3;
  const auto c = generate_corpus(spec);
  REQUIRE_FALSE(c.metadata.injections.empty());
  std::set<std::string> kinds;
  for (const auto& inj : c.metadata.injections) {
    kinds.insert(inj.kind);
    const Sentence* found = nullptr;
    for (const auto& l : c.labels)
      for (const auto& s : l.sentences)
        if (s.id == inj.sentence_id) found = &s;
    REQUIRE(found);
    for (const auto& id : inj.mention_ids) CHECK(found->find_mention(id));
  }
  CHECK(kinds == std::set<std::string>{"coordination", "overlap"});
}

TEST_CASE("a clean corpus loses nothing in the tag encoding") {
  auto spec = default_generator_spec();
  spec.labels = 5;
  const auto r = tagging::roundtrip_upperbound(generate_corpus(spec));
  CHECK(r.dropped.empty());
  CHECK(r.scores.entity_primary.f1() == 1.0);
  CHECK(r.scores.relation_primary.f1() == 1.0);
}

TEST_CASE("coarse PK mode hides the true codes") {
  auto spec = default_generator_spec();
  spec.labels = 4;
  spec.coarse_pk = true;
  const auto codes = CodeVocabulary::placeholder();
  const auto c = generate_corpus(spec, codes);
  CHECK(c.provenance == Provenance::Mapped);
  std::size_t pk = 0;
  for (const auto& l : c.labels)
    for (const auto& s : l.sentences)
      for (const auto& in : s.interactions) {
        const auto* code = std::get_if<PkCode>(&in.outcome);
        if (!code) continue;
        ++pk;
        REQUIRE(is_coarse_marker(code->code));
        const auto& hidden = c.metadata.hidden_codes.at(s.id + "/" + in.id);
        CHECK(codes.contains(hidden));
        CHECK(codes.direction_of(hidden) == coarse_direction(code->code));
      }
  CHECK(pk > 0);
  CHECK(c.metadata.hidden_codes.size() == pk);
}

TEST_CASE("unrealizable specifications are usage errors") {
  auto spec = default_generator_spec();
  SUBCASE("mixture off the simplex") { spec.mention_mixture = {0.5, 0.5, 0.5}; }
  SUBCASE("negative weight") { spec.interaction_mixture = {1.2, -0.2, 0.0}; }
  SUBCASE("rate out of range") { spec.overlap_rate = 1.5; }
  SUBCASE("effects without PD") { spec.interaction_mixture = {0.0, 0.5, 0.5}; }
  SUBCASE("more triggers than precipitants") { spec.mention_mixture = {0.6, 0.3, 0.1}; }
  SUBCASE("word lists too short") { spec.precipitants.resize(2); }
  SUBCASE("no labels") { spec.labels = 0; }
  CHECK_THROWS_AS(generate_corpus(spec), UsageError);
}
