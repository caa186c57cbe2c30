#include "ddi/score.hpp"

#include <cstdio>
#include <json.hpp>
#include <set>
#include <tuple>

#include "ddi/error.hpp"

namespace ddi::scoring {
namespace {

// Relaxed keys use kind -1; outcome is "" for relaxed relation keys.
using EntityKey = std::tuple<int, SpanList>;
using RelationKey = std::tuple<SpanList, int, std::string>;

std::string outcome_signature(const Sentence& s, const Interaction& in) {
  if (const auto* e = std::get_if<EffectLink>(&in.outcome)) {
    const Mention* m = s.find_mention(e->effect_id);
    std::string sig = "effect:";
    if (m)
      for (const auto& sp : m->spans) sig += std::to_string(sp.start) + "-" + std::to_string(sp.end) + ";";
    return sig;
  }
  if (const auto* c = std::get_if<PkCode>(&in.outcome)) return "code:" + c->code;
  return "none";
}

struct KeySets {
  std::set<EntityKey> entity_primary, entity_relaxed;
  std::set<RelationKey> relation_primary, relation_relaxed;
};

KeySets keys_of(const Sentence& s, const std::optional<MentionKind>& mention_filter = std::nullopt,
                const std::optional<InteractionKind>& interaction_filter = std::nullopt) {
  KeySets k;
  for (const auto& m : s.mentions) {
    if (mention_filter && m.kind != *mention_filter) continue;
    k.entity_primary.emplace(static_cast<int>(m.kind), m.spans);
    k.entity_relaxed.emplace(-1, m.spans);
  }
  for (const auto& in : s.interactions) {
    if (interaction_filter && in.kind() != *interaction_filter) continue;
    const Mention* p = s.find_mention(in.precipitant_id);
    // Relations are keyed by precipitant bounds; triggers never enter.
    if (!p || p->kind != MentionKind::Precipitant) continue;
    k.relation_primary.emplace(p->spans, static_cast<int>(in.kind()), outcome_signature(s, in));
    k.relation_relaxed.emplace(p->spans, -1, "");
  }
  return k;
}

template <typename Key>
Counts count(const std::set<Key>& gold, const std::set<Key>& pred) {
  Counts c;
  for (const auto& k : pred) {
    if (gold.count(k))
      ++c.tp;
    else
      ++c.fp;
  }
  c.fn = gold.size() - c.tp;
  return c;
}

ScoreReport compare(const KeySets& g, const KeySets& p) {
  ScoreReport r;
  r.entity_primary = count(g.entity_primary, p.entity_primary);
  r.entity_relaxed = count(g.entity_relaxed, p.entity_relaxed);
  r.relation_primary = count(g.relation_primary, p.relation_primary);
  r.relation_relaxed = count(g.relation_relaxed, p.relation_relaxed);
  return r;
}

std::map<std::string, const Sentence*> index_sentences(const CorpusFile& c) {
  std::map<std::string, const Sentence*> out;
  for (const auto& l : c.labels)
    for (const auto& s : l.sentences) out.emplace(s.id, &s);
  return out;
}

std::vector<std::pair<const Sentence*, const Sentence*>> pair_sentences(const CorpusFile& gold,
                                                                        const CorpusFile& pred) {
  const auto g = index_sentences(gold);
  const auto p = index_sentences(pred);
  std::vector<std::string> divergent;
  std::vector<std::pair<const Sentence*, const Sentence*>> out;
  for (const auto& [id, gs] : g) {
    auto it = p.find(id);
    if (it == p.end() || it->second->text != gs->text) {
      divergent.push_back(id);
      continue;
    }
    out.emplace_back(gs, it->second);
  }
  for (const auto& [id, ps] : p)
    if (!g.count(id)) divergent.push_back(id);
  if (!divergent.empty()) {
    std::string msg = "gold and predicted corpora differ in sentence skeleton:";
    for (std::size_t i = 0; i < divergent.size() && i < 20; ++i) msg += " " + divergent[i];
    if (divergent.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  return out;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

std::string row(const std::string& name, const Counts& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %6zu %6zu %6zu  %s  %s  %s\n", name.c_str(), c.tp, c.fp, c.fn,
                pct(c.precision()).c_str(), pct(c.recall()).c_str(), pct(c.f1()).c_str());
  return buf;
}

std::string header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %6s %6s %6s  %6s  %6s  %6s\n", "criterion", "TP", "FP", "FN", "P", "R",
                "F1");
  return buf;
}

}  // namespace

double Counts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double Counts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
double Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Counts& Counts::operator+=(const Counts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

const Counts& ScoreReport::get(Task task, Mode mode) const {
  if (task == Task::Entity) return mode == Mode::Primary ? entity_primary : entity_relaxed;
  return mode == Mode::Primary ? relation_primary : relation_relaxed;
}

Counts& ScoreReport::get(Task task, Mode mode) {
  return const_cast<Counts&>(static_cast<const ScoreReport&>(*this).get(task, mode));
}

ScoreReport& ScoreReport::operator+=(const ScoreReport& o) {
  entity_primary += o.entity_primary;
  entity_relaxed += o.entity_relaxed;
  relation_primary += o.relation_primary;
  relation_relaxed += o.relation_relaxed;
  return *this;
}

std::string ScoreReport::table() const {
  return header() + row("entity primary", entity_primary) + row("entity relaxed", entity_relaxed) +
         row("relation primary", relation_primary) + row("relation relaxed", relation_relaxed);
}

std::string ScoreReport::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* name, const Counts& c) {
    j[name] = {{"tp", c.tp},          {"fp", c.fp},       {"fn", c.fn},
               {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
  };
  put("entity_primary", entity_primary);
  put("entity_relaxed", entity_relaxed);
  put("relation_primary", relation_primary);
  put("relation_relaxed", relation_relaxed);
  return j.dump(2) + "\n";
}

ScoreReport score_sentence(const Sentence& gold, const Sentence& pred) {
  if (gold.id != pred.id || gold.text != pred.text) throw DataError("sentence skeleton mismatch at " + gold.id);
  return compare(keys_of(gold), keys_of(pred));
}

ScoreReport score(const CorpusFile& gold, const CorpusFile& pred) {
  ScoreReport total;
  for (const auto& [g, p] : pair_sentences(gold, pred)) total += compare(keys_of(*g), keys_of(*p));
  return total;
}

Breakdown score_breakdown(const CorpusFile& gold, const CorpusFile& pred) {
  Breakdown b;
  for (const auto& [g, p] : pair_sentences(gold, pred)) {
    for (auto kind : {MentionKind::Trigger, MentionKind::Precipitant, MentionKind::SpecificInteraction}) {
      b.entity_primary_by_kind[kind] +=
          count(keys_of(*g, kind, std::nullopt).entity_primary, keys_of(*p, kind, std::nullopt).entity_primary);
    }
    for (auto kind : {InteractionKind::PD, InteractionKind::PK, InteractionKind::UN}) {
      b.relation_primary_by_kind[kind] += count(keys_of(*g, std::nullopt, kind).relation_primary,
                                                keys_of(*p, std::nullopt, kind).relation_primary);
    }
    b.by_section[g->section] += compare(keys_of(*g), keys_of(*p));
  }
  return b;
}

std::string Breakdown::table() const {
  std::string out = "by kind (primary)\n" + header();
  for (const auto& [k, c] : entity_primary_by_kind) out += row("entity " + std::string(to_string(k)).substr(0, 11), c);
  for (const auto& [k, c] : relation_primary_by_kind) out += row("relation " + std::string(to_string(k)), c);
  for (const auto& [section, r] : by_section) out += "\nsection " + section + "\n" + r.table();
  return out;
}

}  // namespace ddi::scoring
