#include "ddi/ensemble.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi::ensemble {
namespace {

void vote(std::vector<std::size_t>& voters, std::size_t set) {
  if (voters.empty() || voters.back() != set) voters.push_back(set);
}

bool co_occurred(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  // Both lists are sorted because sets are visited in index order.
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] == b[j]) return true;
    a[i] < b[j] ? ++i : ++j;
  }
  return false;
}

template <typename Key>
struct Candidate {
  Key key;
  SpanList spans;  // every span the annotation covers, sorted
  const std::vector<std::size_t>* voters;
};

SpanList spans_of(const EntityKey& k) { return k.spans; }

SpanList spans_of(const RelationKey& k) {
  SpanList s = k.precipitant;
  s.insert(s.end(), k.effect.begin(), k.effect.end());
  std::sort(s.begin(), s.end());
  return s;
}

std::size_t kind_rank(const EntityKey& k) { return static_cast<std::size_t>(k.kind); }
std::size_t kind_rank(const RelationKey& k) { return static_cast<std::size_t>(k.kind); }

template <typename Key>
bool ranks_before(const Candidate<Key>& a, const Candidate<Key>& b) {
  if (a.voters->size() != b.voters->size()) return a.voters->size() > b.voters->size();
  const auto sa = a.spans.front().start, sb = b.spans.front().start;
  if (sa != sb) return sa < sb;
  if (kind_rank(a.key) != kind_rank(b.key)) return kind_rank(a.key) < kind_rank(b.key);
  return a.key < b.key;
}

template <typename Key>
bool conflicts(const Candidate<Key>& a, const Candidate<Key>& b) {
  return spans_overlap(a.spans, b.spans) && !co_occurred(*a.voters, *b.voters);
}

/// Greedy acceptance in rank order; counts the candidates below the vote threshold and the conflicts.
template <typename Key>
std::vector<Candidate<Key>> accept(const std::map<Key, std::vector<std::size_t>>& pool, std::size_t min_votes,
                                   std::size_t& below, std::size_t& conflicted) {
  std::vector<Candidate<Key>> cands;
  for (const auto& [key, voters] : pool) {
    if (voters.size() >= min_votes)
      cands.push_back({key, spans_of(key), &voters});
    else
      ++below;
  }
  std::sort(cands.begin(), cands.end(), ranks_before<Key>);
  std::vector<Candidate<Key>> kept;
  for (const auto& c : cands) {
    if (std::any_of(kept.begin(), kept.end(), [&](const Candidate<Key>& k) { return conflicts(k, c); }))
      ++conflicted;
    else
      kept.push_back(c);
  }
  return kept;
}

bool positional(const EntityKey& a, const EntityKey& b) {
  const auto sa = a.spans.front().start, sb = b.spans.front().start;
  if (sa != sb) return sa < sb;
  return a < b;
}

}  // namespace

void check_same_skeleton(const std::vector<CorpusFile>& sets) {
  if (sets.empty()) throw UsageError("ensemble merge needs at least one prediction set");
  const auto& ref = sets.front();
  for (std::size_t k = 1; k < sets.size(); ++k) {
    const auto& other = sets[k];
    std::vector<std::string> bad;
    if (other.labels.size() != ref.labels.size()) {
      throw DataError("prediction set " + std::to_string(k + 1) + " has " + std::to_string(other.labels.size()) +
                      " labels, set 1 has " + std::to_string(ref.labels.size()));
    }
    for (std::size_t l = 0; l < ref.labels.size(); ++l) {
      const auto& a = ref.labels[l];
      const auto& b = other.labels[l];
      if (a.id != b.id || a.sentences.size() != b.sentences.size()) {
        bad.push_back(a.id);
        continue;
      }
      for (std::size_t s = 0; s < a.sentences.size(); ++s)
        if (a.sentences[s].id != b.sentences[s].id || a.sentences[s].text != b.sentences[s].text)
          bad.push_back(a.sentences[s].id);
    }
    if (!bad.empty()) {
      std::string msg = "prediction set " + std::to_string(k + 1) + " diverges from set 1 at:";
      for (const auto& id : bad) msg += " " + id;
      throw DataError(msg);
    }
  }
}

std::vector<SentenceTally> tally(const std::vector<CorpusFile>& sets) {
  check_same_skeleton(sets);
  std::vector<SentenceTally> out;
  for (std::size_t l = 0; l < sets.front().labels.size(); ++l) {
    for (std::size_t s = 0; s < sets.front().labels[l].sentences.size(); ++s) {
      SentenceTally t;
      t.sentence_id = sets.front().labels[l].sentences[s].id;
      for (std::size_t k = 0; k < sets.size(); ++k) {
        const Sentence& sent = sets[k].labels[l].sentences[s];
        for (const auto& m : sent.mentions) {
          if (m.spans.empty()) throw DataError("sentence " + sent.id + ": mention " + m.id + " has no spans");
          vote(t.entities[EntityKey{m.kind, m.spans}], k);
        }
        for (const auto& in : sent.interactions) {
          const Mention* p = sent.find_mention(in.precipitant_id);
          if (!p) throw DataError("sentence " + sent.id + ": interaction " + in.id + " has no precipitant");
          RelationKey key{p->spans, in.kind(), {}, {}};
          if (const auto* e = std::get_if<EffectLink>(&in.outcome)) {
            const Mention* em = sent.find_mention(e->effect_id);
            if (!em) throw DataError("sentence " + sent.id + ": interaction " + in.id + " has no effect mention");
            key.effect = em->spans;
          } else if (const auto* c = std::get_if<PkCode>(&in.outcome)) {
            key.code = c->code;
          }
          vote(t.relations[key], k);
        }
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

CorpusFile merge(const std::vector<CorpusFile>& sets, std::size_t min_votes, MergeStats* stats) {
  if (sets.empty()) throw UsageError("ensemble merge needs at least one prediction set");
  if (min_votes < 1 || min_votes > sets.size()) {
    throw UsageError("min_votes must lie in [1, " + std::to_string(sets.size()) + "], got " +
                     std::to_string(min_votes));
  }
  const auto tallies = tally(sets);
  MergeStats st;
  CorpusFile out = sets.front();
  out.provenance = Provenance::Predicted;
  out.metadata = {};
  std::size_t t = 0;
  for (auto& label : out.labels) {
    for (auto& sent : label.sentences) {
      const SentenceTally& tl = tallies[t++];
      for (const auto& [key, voters] : tl.entities) {
        ++st.entity_candidates;
        ++st.vote_histogram[voters.size()];
      }
      st.relation_candidates += tl.relations.size();
      auto entities = accept(tl.entities, min_votes, st.below_threshold, st.conflicts);
      std::size_t below_rel = 0;
      auto relations = accept(tl.relations, min_votes, below_rel, st.relation_conflicts);
      st.entities_kept += entities.size();

      // A kept relation needs its argument mentions; add missing ones unless
      // they conflict with a kept entity, in which case the relation goes.
      static const std::vector<std::size_t> kNoVoters;
      auto ensure = [&](MentionKind kind, const SpanList& spans) {
        EntityKey key{kind, spans};
        if (std::any_of(entities.begin(), entities.end(), [&](const auto& e) { return e.key == key; })) return true;
        auto it = tl.entities.find(key);
        Candidate<EntityKey> c{key, spans, it == tl.entities.end() ? &kNoVoters : &it->second};
        if (std::any_of(entities.begin(), entities.end(), [&](const auto& e) { return conflicts(e, c); }))
          return false;
        entities.push_back(c);
        ++st.forced;
        return true;
      };
      std::vector<RelationKey> kept_relations;
      for (const auto& r : relations) {
        bool ok = ensure(MentionKind::Precipitant, r.key.precipitant);
        if (ok && r.key.kind == InteractionKind::PD) ok = ensure(MentionKind::SpecificInteraction, r.key.effect);
        if (ok)
          kept_relations.push_back(r.key);
        else
          ++st.relations_unsupported;
      }
      std::sort(kept_relations.begin(), kept_relations.end(), [](const RelationKey& a, const RelationKey& b) {
        return std::tie(a.precipitant.front().start, a) < std::tie(b.precipitant.front().start, b);
      });
      st.relations_kept += kept_relations.size();

      std::vector<EntityKey> ordered;
      for (const auto& e : entities) ordered.push_back(e.key);
      std::sort(ordered.begin(), ordered.end(), positional);
      std::map<EntityKey, std::string> id_of;
      sent.mentions.clear();
      sent.interactions.clear();
      for (const auto& key : ordered) {
        Mention m;
        m.id = "M" + std::to_string(sent.mentions.size() + 1);
        m.kind = key.kind;
        m.spans = key.spans;
        m.text = covered_text(sent, m);
        id_of[key] = m.id;
        sent.mentions.push_back(std::move(m));
      }
      for (const auto& key : kept_relations) {
        Interaction in;
        in.id = "I" + std::to_string(sent.interactions.size() + 1);
        in.precipitant_id = id_of.at(EntityKey{MentionKind::Precipitant, key.precipitant});
        if (key.kind == InteractionKind::PD)
          in.outcome = EffectLink{id_of.at(EntityKey{MentionKind::SpecificInteraction, key.effect})};
        else if (key.kind == InteractionKind::PK)
          in.outcome = PkCode{key.code};
        sent.interactions.push_back(std::move(in));
      }
    }
  }
  if (stats) *stats = st;
  return out;
}

std::string MergeStats::table() const {
  std::ostringstream out;
  out << "entity candidates     " << entity_candidates << "\n"
      << "  below min votes     " << below_threshold << "\n"
      << "  dropped (conflict)  " << conflicts << "\n"
      << "  kept                " << entities_kept << "\n"
      << "  forced by relations " << forced << "\n"
      << "relation candidates   " << relation_candidates << "\n"
      << "  below min votes     " << (relation_candidates - relations_kept - relation_conflicts - relations_unsupported) << "\n"
      << "  dropped (conflict)  " << relation_conflicts << "\n"
      << "  dropped (arguments) " << relations_unsupported << "\n"
      << "  kept                " << relations_kept << "\n"
      << "votes histogram\n";
  for (const auto& [votes, n] : vote_histogram) out << "  " << votes << ": " << n << "\n";
  return out.str();
}

}  // namespace ddi::ensemble
