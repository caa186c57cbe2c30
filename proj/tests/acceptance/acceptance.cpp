// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Tolerances are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>

#include "../score_oracle.hpp"
#include "../support.hpp"
#include "ddi/ensemble.hpp"
#include "ddi/generator.hpp"
#include "ddi/roundtrip.hpp"
#include "ddi/score.hpp"
#include "ddi/tagging.hpp"
#include "ddi/train.hpp"

using namespace ddi;

namespace {

constexpr double kRecallTolerance = 0.01;
constexpr double kGradTolerance = 1e-4;
constexpr double kRatioTolerance = 1e-12;
constexpr double kOverfitEntityF1 = 0.99;
constexpr double kOverfitRelationF1 = 0.95;
constexpr std::size_t kScorerPairs = 500;
constexpr std::size_t kPermutations = 100;
constexpr std::size_t kMinSeedsPerDirection = 30;
constexpr double kBootstrapAccuracy = 0.90;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1. Golden tags for the Adenocard sentence and decoding back to its annotation.
Verdict tagging_golden() {
  Sentence s;
  s.id = "S1";
  s.text = "The use of Adenocard in patients receiving digitalis may be rarely associated with ventricular fibrillation.";
  s.mentions = {{"M1", MentionKind::Precipitant, {{43, 52}}, "digitalis"},
                {"M2", MentionKind::Trigger, {{67, 82}}, "associated with"},
                {"M3", MentionKind::SpecificInteraction, {{83, 107}}, "ventricular fibrillation"}};
  s.interactions = {{"I1", "M1", EffectLink{"M3"}}};
  const tagging::BindingContext ctx{"Adenocard", {"adenosine"}, {}, false};
  const auto enc = tagging::encode(s, ctx);
  const std::vector<std::string> expected{"O", "O", "O", "O", "O", "O", "O", "B-D",
                                          "O", "O", "O", "B-T", "I-T", "B-E", "I-E", "O"};
  std::vector<std::string> got;
  for (auto t : enc.sequence.tags) got.emplace_back(tagging::to_string(t));
  if (got != expected) return {false, "tag sequence differs"};

  const auto dec = tagging::decode(enc.sequence, s.text);
  if (dec.mentions.size() != s.mentions.size()) return {false, "decoded mention count differs"};
  for (std::size_t i = 0; i < s.mentions.size(); ++i) {
    const auto& d = dec.mentions[i].mention;
    if (d.kind != s.mentions[i].kind || d.spans != s.mentions[i].spans || d.text != s.mentions[i].text)
      return {false, "decoded mention " + s.mentions[i].id + " differs"};
  }
  if (dec.mentions[0].interaction_kind != InteractionKind::PD) return {false, "precipitant not typed PD"};
  const auto rebuilt = tagging::reconstruct(s, enc);
  const auto sc = scoring::score_sentence(s, rebuilt);
  if (sc.entity_primary.f1() != 1.0 || sc.relation_primary.f1() != 1.0) return {false, "reconstruction is not exact"};
  return {true, "16 tags exact, 3 mentions and 1 PD link recovered"};
}

// 2. Round-trip upper bound, clean and with injected drop cases.
Verdict roundtrip_bound() {
  auto spec = corpus::default_generator_spec();
  spec.labels = 20;
  spec.sentences_per_label = 50;
  const auto clean = corpus::generate_corpus(spec);
  const auto r0 = tagging::roundtrip_upperbound(clean);
  if (clean.sentence_count() != 1000) return {false, "corpus size"};
  if (r0.scores.entity_primary.f1() != 1.0 || r0.scores.relation_primary.f1() != 1.0)
    return {false, "clean corpus below 100.00: " + fmt("%.4f", r0.scores.entity_primary.f1())};

  spec.overlap_rate = 0.075;
  spec.coordination_rate = 0.075;
  spec.seed = 2;
  const auto noisy = corpus::generate_corpus(spec);
  const auto r1 = tagging::roundtrip_upperbound(noisy);

  // Predicted recall straight from the encoder reports.
  std::size_t kept = 0, mentions = 0, relations_kept = 0, relations = 0;
  for (const auto& l : noisy.labels) {
    const auto ctx = tagging::binding_for(l);
    for (const auto& s : l.sentences) {
      const auto enc = tagging::encode(s, ctx);
      kept += enc.report.kept.size();
      mentions += s.mentions.size();
      relations_kept += enc.report.relations.size();
      relations += s.interactions.size();
    }
  }
  if (r1.dropped.empty()) return {false, "no drop cases injected"};
  const double ent_pred = static_cast<double>(kept) / static_cast<double>(mentions);
  const double rel_pred = static_cast<double>(relations_kept) / static_cast<double>(relations);
  const double ent_gap = std::abs(r1.scores.entity_primary.recall() - ent_pred);
  const double rel_gap = std::abs(r1.scores.relation_primary.recall() - rel_pred);
  const bool ok = ent_gap <= kRecallTolerance && rel_gap <= kRecallTolerance;
  return {ok, "clean 100.00/100.00; injected " + std::to_string(r1.dropped.size()) + " drops, entity recall " +
                  fmt("%.4f", r1.scores.entity_primary.recall()) + " vs " + fmt("%.4f", ent_pred) +
                  ", relation recall " + fmt("%.4f", r1.scores.relation_primary.recall()) + " vs " +
                  fmt("%.4f", rel_pred)};
}

// 3. Central-difference gradient check over every parameter entry.
Verdict gradient_suite() {
  auto m = testing::micro_model();
  const auto ex = testing::micro_example(m);
  const auto gc = testing::check_gradients(m, ex);
  return {gc.max_relative_error < kGradTolerance, std::to_string(gc.entries) + " entries, max relative error " +
                                                      fmt("%.3g", gc.max_relative_error) + " at " + gc.worst};
}

// 4. Encoder gradients from the outcome objectives scale by exactly 0.1.
Verdict gradient_scaling() {
  auto m = testing::micro_model();
  const auto ex = testing::micro_example(m);
  const double err = testing::outcome_gradient_ratio_error(m, ex, 0.1);
  return {err <= kRatioTolerance, "max deviation " + fmt("%.3g", err)};
}

// 5. A small model memorizes a 20-sentence corpus.
Verdict overfit() {
  auto spec = corpus::default_generator_spec();
  spec.seed = 7;
  spec.labels = 2;
  spec.sentences_per_label = 10;
  spec.annotated_proportion = 1.0;
  const auto c = corpus::generate_corpus(spec);
  model::ModelConfig mc;
  mc.word_dim = 16;
  mc.char_dim = 8;
  mc.char_filters = 8;
  mc.hidden = 16;
  mc.rel_filters = 8;
  train::TrainConfig tc;
  tc.epochs = 200;
  tc.seed = 3;
  std::vector<train::WeightedCorpus> wc{{&c, tagging::WeightClass::Primary}};
  auto m = train::build_model(wc, mc, CodeVocabulary::placeholder(), 11);
  train::train(m, wc, c, tc, {});
  const auto r = scoring::score(c, infer::predict_corpus(m, c, {}));
  const double ent = r.entity_primary.f1(), rel = r.relation_primary.f1();
  return {ent >= kOverfitEntityF1 && rel >= kOverfitRelationF1,
          "entity F1 " + fmt("%.4f", ent) + ", relation F1 " + fmt("%.4f", rel)};
}

// 6. Scorer against the brute-force oracle.
Verdict scorer_oracle() {
  std::mt19937_64 rng(6);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < kScorerPairs; ++i) {
    const auto [g, p] = testing::random_pair(rng);
    mismatches += !testing::matches_oracle(scoring::score(g, p), testing::oracle_score(g, p));
  }
  return {mismatches == 0, std::to_string(kScorerPairs - mismatches) + "/" + std::to_string(kScorerPairs) +
                               " pairs match on all four criteria"};
}

// Noisy copies of one gold corpus for the ensemble checks.
std::vector<CorpusFile> noisy_sets(std::size_t k, std::uint64_t seed) {
  auto spec = corpus::default_generator_spec();
  spec.labels = 4;
  spec.sentences_per_label = 12;
  spec.overlap_rate = 0.3;
  spec.coordination_rate = 0.3;
  const auto gold = corpus::generate_corpus(spec);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(0.7);
  std::vector<CorpusFile> sets;
  for (std::size_t i = 0; i < k; ++i) {
    CorpusFile out = gold;
    out.provenance = Provenance::Predicted;
    out.metadata = {};
    for (auto& l : out.labels)
      for (auto& s : l.sentences) {
        std::set<std::string> alive;
        std::vector<Mention> ms;
        for (const auto& m : s.mentions)
          if (keep(rng)) {
            alive.insert(m.id);
            ms.push_back(m);
          }
        std::vector<Interaction> ins;
        for (const auto& in : s.interactions) {
          if (!alive.count(in.precipitant_id)) continue;
          if (const auto* e = std::get_if<EffectLink>(&in.outcome); e && !alive.count(e->effect_id)) continue;
          ins.push_back(in);
        }
        s.mentions = std::move(ms);
        s.interactions = std::move(ins);
      }
    sets.push_back(std::move(out));
  }
  return sets;
}

using KeySet = std::pair<std::set<ensemble::EntityKey>, std::set<ensemble::RelationKey>>;

KeySet keys_of(const CorpusFile& c) {
  KeySet out;
  for (const auto& t : ensemble::tally({c})) {
    for (const auto& [k, _] : t.entities) out.first.insert(k);
    for (const auto& [k, _] : t.relations) out.second.insert(k);
  }
  return out;
}

// 7. Ensemble merge: order invariance, identity at k=1, monotone in min votes.
Verdict ensemble_properties() {
  auto sets = noisy_sets(5, 7);
  const auto reference = corpus::serialize_corpus(ensemble::merge(sets, 1));
  std::mt19937_64 rng(7);
  for (std::size_t i = 0; i < kPermutations; ++i) {
    std::shuffle(sets.begin(), sets.end(), rng);
    if (corpus::serialize_corpus(ensemble::merge(sets, 1)) != reference)
      return {false, "permutation " + std::to_string(i) + " changed the merge"};
  }
  for (const auto& s : sets)
    if (keys_of(ensemble::merge({s}, 1)) != keys_of(s)) return {false, "k=1 merge is not the identity"};
  KeySet previous = keys_of(ensemble::merge(sets, 1));
  for (std::size_t v = 2; v <= sets.size(); ++v) {
    const auto now = keys_of(ensemble::merge(sets, v));
    const bool sub = std::includes(previous.first.begin(), previous.first.end(), now.first.begin(), now.first.end()) &&
                     std::includes(previous.second.begin(), previous.second.end(), now.second.begin(),
                                   now.second.end());
    if (!sub) return {false, "min votes " + std::to_string(v) + " added annotations"};
    previous = now;
  }
  return {true, std::to_string(kPermutations) + " permutations identical, identity on 5 sets, monotone for v=1..5"};
}

// 8. Mini-batch size and iterations per epoch.
Verdict minibatch_formula() {
  const std::vector<std::size_t> ns{1, 299, 300, 900, 10000};
  const std::vector<std::size_t> expected{1, 1, 2, 4, 34};
  bool sizes = true, range = true;
  std::string detail = "N_b";
  std::string iters = "; iterations";
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto nb = train::minibatch_size(ns[i]);
    const auto it = train::iterations_per_epoch(ns[i]);
    sizes = sizes && nb == expected[i];
    range = range && it >= 300 && it < 600;
    detail += " " + std::to_string(nb);
    iters += " " + std::to_string(it);
  }
  detail += sizes ? " (match)" : " (mismatch)";
  iters += range ? " (all in [300, 600))" : " (not all in [300, 600))";
  return {sizes && range, detail + iters};
}

// 9. PK bootstrapping never accepts a direction-inconsistent code and is
// accurate on generator data with hidden true codes.
Verdict bootstrap_consistency() {
  const auto codes = CodeVocabulary::placeholder();
  auto spec = corpus::default_generator_spec();
  spec.labels = 10;
  spec.sentences_per_label = 24;
  spec.annotated_proportion = 1.0;
  spec.interaction_mixture = {0.15, 0.7, 0.15};
  spec.seed = 21;
  const auto seeds_corpus = corpus::generate_corpus(spec, codes);
  spec.seed = 22;
  spec.coarse_pk = true;
  const auto mapped = corpus::generate_corpus(spec, codes);

  model::ModelConfig mc;
  mc.word_dim = 32;
  mc.char_dim = 8;
  mc.char_filters = 8;
  mc.hidden = 32;
  mc.rel_filters = 50;
  train::TrainConfig tc;
  tc.seed = 5;
  std::vector<train::WeightedCorpus> wc{{&seeds_corpus, tagging::WeightClass::Primary},
                                        {&mapped, tagging::WeightClass::Auxiliary}};
  auto m = train::build_model(wc, mc, codes, 11);
  const auto seeds = train::pk_candidates(m, seeds_corpus, tc, tagging::WeightClass::Primary);
  const auto coarse = train::pk_candidates(m, mapped, tc, tagging::WeightClass::Auxiliary);

  std::size_t inc = 0, dec = 0;
  std::set<std::string> seeded;
  for (const auto& s : seeds) {
    (codes.direction_of(*s.code) == Direction::Increase ? inc : dec) += 1;
    seeded.insert(*s.code);
  }
  if (inc < kMinSeedsPerDirection || dec < kMinSeedsPerDirection)
    return {false, "precondition: seeds per direction " + std::to_string(inc) + "/" + std::to_string(dec)};
  if (seeded.size() != codes.size()) return {false, "precondition: not every code has seeds"};

  train::BootstrapConfig bc;
  bc.epochs_per_iteration = 10;
  const auto r = train::bootstrap_pk(m, seeds, coarse, codes, tc, bc);
  std::size_t inconsistent = 0, correct = 0;
  for (const auto& a : r.accepted) {
    const auto it = std::find_if(coarse.begin(), coarse.end(), [&](const train::PkCandidate& c) { return c.id == a.id; });
    if (it == coarse.end() || !it->coarse || codes.direction_of(a.code) != *it->coarse) ++inconsistent;
    correct += mapped.metadata.hidden_codes.at(a.id) == a.code;
  }
  const double accuracy = r.accepted.empty() ? 0.0 : static_cast<double>(correct) / r.accepted.size();
  return {inconsistent == 0 && accuracy >= kBootstrapAccuracy && !r.accepted.empty(),
          std::to_string(seeds.size()) + " seeds (" + std::to_string(inc) + " increase, " + std::to_string(dec) +
              " decrease); " + std::to_string(r.accepted.size()) + " accepted, " + std::to_string(inconsistent) +
              " inconsistent, accuracy " + fmt("%.4f", accuracy) + ", " + std::to_string(r.review.size()) +
              " review, " + std::to_string(r.pending.size()) + " pending"};
}

// 10. Shapes realized by the default configuration.
Verdict architecture_audit() {
  const model::Model m(model::ModelConfig{},
                       model::Vocabulary::build({tagging::tokenize("Aspirin may increase bleeding .")}),
                       CodeVocabulary::placeholder(), 1);
  const auto& a = m.audit();
  const bool ok = a.char_composition == 50 && a.context == 200 && a.rel == 150 && a.ner_classes == 11 &&
                  a.pk_classes == 20 && a.pd_classes == 2;
  return {ok, "char " + std::to_string(a.char_composition) + ", context " + std::to_string(a.context) + ", v " +
                  std::to_string(a.rel) + ", classes " + std::to_string(a.ner_classes) + "/" +
                  std::to_string(a.pk_classes) + "/" + std::to_string(a.pd_classes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"tagging golden sentence", tagging_golden},
      {"round-trip upper bound", roundtrip_bound},
      {"gradient check", gradient_suite},
      {"outcome gradient scaling", gradient_scaling},
      {"overfit small corpus", overfit},
      {"scorer oracle", scorer_oracle},
      {"ensemble properties", ensemble_properties},
      {"mini-batch formula", minibatch_formula},
      {"bootstrap consistency", bootstrap_consistency},
      {"architecture audit", architecture_audit},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %-26s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
