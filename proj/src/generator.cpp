#include "ddi/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "ddi/error.hpp"
#include "ddi/nn/tensor.hpp"
#include "ddi/tagging.hpp"
#include "ddi/utf8.hpp"

namespace ddi::corpus {
namespace {

using nn::uniform01;

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(uniform01(rng) * n) % n; }

template <typename T>
const T& choose(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[pick(rng, v.size())];
}

const std::vector<std::string> kSections{"WARNINGS AND PRECAUTIONS", "DRUG INTERACTIONS", "CLINICAL PHARMACOLOGY"};

const std::vector<std::string> kPrefixes{
    "In a clinical study,",          "Based on available data,", "During postmarketing experience,",
    "In healthy volunteers,",        "In controlled trials,",    "As reported in published studies,",
    "In pharmacokinetic studies,",   "Following repeated dosing,"};
const std::vector<std::string> kSuffixes{
    ", and patients should be monitored closely", ", although the clinical significance is unknown",
    "; dose adjustment may be required",           ", particularly in elderly patients",
    "in a dose dependent manner",                  ", as observed in several case reports",
    "over the course of treatment",                "in patients with renal impairment"};
const std::vector<std::string> kFillers{"in clinical practice", "at usual doses", "after a single dose",
                                        "in most patients",     "at steady state", "during therapy"};

const std::vector<std::string> kPdTriggers{"associated with", "increase the risk of", "potentiate", "enhance"};
const std::vector<std::string> kPdTriggerLead{"may be", "may", "can", "may"};
const std::vector<std::string> kPdConnectives{"was followed by", "preceded episodes of"};
const std::vector<std::string> kIncreaseVerbs{"increased", "raised", "elevated"};
const std::vector<std::string> kDecreaseVerbs{"decreased", "reduced", "lowered"};
const std::vector<std::string> kUnTriggers{"Caution", "Avoid", "Monitor"};
const std::vector<std::string> kUnTriggerTail{"is advised when coadministering", "concomitant use of",
                                              "patients closely when combining"};
const std::vector<std::string> kHeads{"inhibitors", "inducers"};

const std::vector<std::string> kSyllables{"ra", "ben", "zo", "tal", "mi", "vor", "den", "ca", "lix", "pro",
                                          "ne", "sul", "tri", "fa", "gon", "te", "quin", "dar", "mo", "xel"};

enum class Clause { PD, PK, UN };

struct Shape {
  Clause kind;
  std::size_t precipitants;  // list items (an injected item counts once here)
  std::size_t effects;
  std::size_t triggers;
};

// A piece of sentence text; pieces with a slot >= 0 carry a mention part.
struct Piece {
  std::string text;
  int slot = -1;
};

// Each range covers the pieces from its first slot through its last slot;
// several ranges make a discontiguous mention.
struct MentionPlan {
  MentionKind kind;
  std::vector<std::pair<int, int>> ranges;
};

struct InteractionPlan {
  std::size_t precipitant;          // index into mention plans
  std::optional<std::size_t> effect;
  std::optional<std::string> code;  // PK
};

struct ClausePlan {
  std::vector<Piece> pieces;
  std::vector<MentionPlan> mentions;
  std::vector<InteractionPlan> interactions;
  std::optional<std::string> injection;
};

bool effects_list_too_small(const GeneratorSpec& s) { return s.effects.size() < 2; }

std::size_t word_count(const std::string& s) { return tagging::tokenize(s).size(); }

class Generator {
 public:
  Generator(const GeneratorSpec& spec, const CodeVocabulary& codes) : spec_(spec), codes_(codes), rng_(spec.seed) {}

  CorpusFile run() {
    CorpusFile out;
    out.provenance = spec_.coarse_pk ? Provenance::Mapped : Provenance::Synthetic;
    out.metadata.seed = spec_.seed;
    const auto names = label_names();
    for (std::size_t l = 0; l < spec_.labels; ++l) out.labels.push_back(make_label(l, names[l], out.metadata));
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> label_names() {
    std::set<std::string> used(spec_.precipitants.begin(), spec_.precipitants.end());
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t next = 0;
    while (out.size() < spec_.labels) {
      std::string brand, generic;
      if (next < spec_.label_drugs.size()) {
        brand = spec_.label_drugs[next++];
      } else {
        for (int k = 0; k < 3; ++k) brand += choose(rng_, kSyllables);
        brand[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(brand[0])));
      }
      for (int k = 0; k < 3; ++k) generic += choose(rng_, kSyllables);
      generic += choose(rng_, std::vector<std::string>{"pril", "statin", "mycin", "azole", "olol"});
      auto lower = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
      };
      if (used.count(lower(brand)) || used.count(generic) || lower(brand) == generic) continue;
      used.insert(lower(brand));
      used.insert(generic);
      out.emplace_back(brand, generic);
    }
    return out;
  }

  DrugLabel make_label(std::size_t index, const std::pair<std::string, std::string>& names, CorpusMetadata& meta) {
    DrugLabel label;
    char id[16];
    std::snprintf(id, sizeof id, "L%03zu", index + 1);
    label.id = id;
    label.drug = names.first;
    label.aliases = {names.second};

    const std::size_t n = spec_.sentences_per_label;
    // Exact per-label quota of annotated sentences, carried across labels so
    // the corpus-wide proportion tracks the target.
    quota_carry_ += spec_.annotated_proportion * static_cast<double>(n);
    const auto annotated = static_cast<std::size_t>(std::min<double>(std::floor(quota_carry_ + 1e-9), n));
    quota_carry_ -= static_cast<double>(annotated);
    std::vector<bool> flags(n, false);
    std::fill_n(flags.begin(), annotated, true);
    for (std::size_t i = n; i > 1; --i) std::swap(flags[i - 1], flags[pick(rng_, i)]);

    for (std::size_t s = 0; s < n; ++s) {
      char sid[32];
      std::snprintf(sid, sizeof sid, "%s.S%03zu", label.id.c_str(), s + 1);
      Sentence sentence;
      sentence.id = sid;
      sentence.section = kSections[std::min(kSections.size() - 1, s * kSections.size() / std::max<std::size_t>(n, 1))];
      const std::string& ld = pick(rng_, 3) == 0 ? names.second : names.first;
      if (flags[s])
        annotated_sentence(sentence, ld, meta);
      else
        plain_sentence(sentence, ld);
      label.sentences.push_back(std::move(sentence));
    }
    return label;
  }

  std::size_t target_words() {
    return spec_.min_words + pick(rng_, spec_.max_words - spec_.min_words + 1);
  }

  void plain_sentence(Sentence& s, const std::string& ld) {
    static const std::vector<std::string> bodies{
        "should be taken with food", "is supplied as film coated tablets", "should be stored at room temperature",
        "has not been studied in pediatric patients", "is extensively metabolized in the liver",
        "was well tolerated in clinical trials"};
    std::vector<Piece> pieces{{ld}, {choose(rng_, bodies)}};
    pad(pieces);
    assemble(s, pieces, {}, {});
  }

  // Adds prefix, suffix and filler phrases until the target length is reached.
  void pad(std::vector<Piece>& pieces) {
    const std::size_t target = target_words();
    auto count = [&] {
      std::size_t w = 1;  // final period
      for (const auto& p : pieces) w += word_count(p.text);
      return w;
    };
    if (count() < target && pick(rng_, 2) == 0) pieces.insert(pieces.begin(), Piece{choose(rng_, kPrefixes)});
    if (count() < target) pieces.push_back(Piece{choose(rng_, kSuffixes)});
    while (count() < target) pieces.push_back(Piece{choose(rng_, kFillers)});
  }

  void assemble(Sentence& s, const std::vector<Piece>& pieces, const std::vector<MentionPlan>& mentions,
                const std::vector<InteractionPlan>& interactions) {
    std::string text;
    std::size_t cp = 0;
    std::map<int, Span> slot_span;
    for (const auto& p : pieces) {
      const bool attach = !p.text.empty() && (p.text[0] == ',' || p.text[0] == ';');
      if (!text.empty() && !attach) {
        text += ' ';
        ++cp;
      }
      const std::size_t len = utf8::length(p.text);
      if (p.slot >= 0) slot_span[p.slot] = Span{cp, cp + len};
      text += p.text;
      cp += len;
    }
    text += '.';
    // Sentence-initial capital.
    if (!text.empty() && std::islower(static_cast<unsigned char>(text[0])) && pieces.front().slot < 0) {
      text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    }
    s.text = text;
    const auto u = utf8::decode(text);
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      Mention m;
      m.id = "M" + std::to_string(i + 1);
      m.kind = mentions[i].kind;
      for (const auto& [first, last] : mentions[i].ranges)
        m.spans.push_back(Span{slot_span.at(first).start, slot_span.at(last).end});
      m.text = covered_text(u, m.spans);
      s.mentions.push_back(std::move(m));
    }
    for (std::size_t i = 0; i < interactions.size(); ++i) {
      Interaction in;
      in.id = "I" + std::to_string(i + 1);
      in.precipitant_id = s.mentions[interactions[i].precipitant].id;
      if (interactions[i].effect)
        in.outcome = EffectLink{s.mentions[*interactions[i].effect].id};
      else if (interactions[i].code)
        in.outcome = PkCode{*interactions[i].code};
      s.interactions.push_back(std::move(in));
    }
  }

  // Candidate clause shapes and the projected statistics each would produce.
  std::vector<Shape> candidates() const {
    std::vector<Shape> out;
    for (std::size_t t = 0; t <= 1; ++t) {
      if (spec_.interaction_mixture[0] > 0)
        for (std::size_t p = 1; p <= 3; ++p)
          for (std::size_t e = 1; e <= 2; ++e) out.push_back({Clause::PD, p, e, t});
      if (spec_.interaction_mixture[1] > 0)
        for (std::size_t p = 1; p <= 2; ++p) out.push_back({Clause::PK, p, 0, t});
      if (spec_.interaction_mixture[2] > 0)
        for (std::size_t p = 1; p <= 2; ++p) out.push_back({Clause::UN, p, 0, t});
    }
    return out;
  }

  double projected_error(const Shape& s, std::size_t injected_extra) const {
    auto m = mention_counts_;
    auto i = interaction_counts_;
    const std::size_t precs = s.precipitants + injected_extra;
    m[0] += s.triggers;
    m[1] += precs;
    m[2] += s.effects;
    const std::size_t links = s.kind == Clause::PD ? precs * s.effects : precs;
    i[static_cast<std::size_t>(s.kind)] += links;
    auto err = [](const std::array<std::size_t, 3>& c, const std::array<double, 3>& target) {
      const double total = static_cast<double>(c[0] + c[1] + c[2]);
      double e = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double d = (total > 0 ? static_cast<double>(c[k]) / total : 0.0) - target[k];
        e += d * d;
      }
      return e;
    };
    return err(m, spec_.mention_mixture) + err(i, spec_.interaction_mixture);
  }

  void annotated_sentence(Sentence& s, const std::string& ld, CorpusMetadata& meta) {
    std::optional<std::string> injection;
    if (uniform01(rng_) < spec_.overlap_rate)
      injection = "overlap";
    else if (uniform01(rng_) < spec_.coordination_rate)
      injection = "coordination";

    auto cands = candidates();
    if (injection) {
      // An injected item stands for the whole precipitant list.
      std::erase_if(cands, [](const Shape& c) { return c.precipitants != 1; });
    }
    const std::size_t extra = injection ? 1 : 0;
    std::size_t best = 0;
    double best_err = projected_error(cands[0], extra);
    for (std::size_t k = 1; k < cands.size(); ++k) {
      const double e = projected_error(cands[k], extra);
      if (e < best_err) {
        best_err = e;
        best = k;
      }
    }
    // Occasional exploration keeps sentence shapes varied.
    const Shape shape = uniform01(rng_) < 0.25 ? cands[pick(rng_, cands.size())] : cands[best];
    ClausePlan plan = build_clause(shape, ld, injection);
    pad(plan.pieces);
    assemble(s, plan.pieces, plan.mentions, plan.interactions);

    for (const auto& m : s.mentions) ++mention_counts_[static_cast<std::size_t>(m.kind)];
    for (const auto& in : s.interactions) ++interaction_counts_[static_cast<std::size_t>(in.kind())];
    if (injection) {
      Injection rec{s.id, *injection, {}};
      for (const auto& m : s.mentions)
        if (m.kind == MentionKind::Precipitant) rec.mention_ids.push_back(m.id);
      meta.injections.push_back(std::move(rec));
    }
    if (spec_.coarse_pk) {
      for (auto& in : s.interactions) {
        if (auto* c = std::get_if<PkCode>(&in.outcome)) {
          meta.hidden_codes[s.id + "/" + in.id] = c->code;
          c->code = coarse_marker(*codes_.direction_of(c->code));
        }
      }
    }
  }

  // Appends the precipitant list pieces, returning mention plan indices.
  std::vector<std::size_t> precipitant_list(ClausePlan& plan, std::size_t count,
                                            const std::optional<std::string>& injection) {
    std::vector<std::size_t> ids;
    auto add_mention = [&](std::vector<std::pair<int, int>> ranges) {
      plan.mentions.push_back({MentionKind::Precipitant, std::move(ranges)});
      ids.push_back(plan.mentions.size() - 1);
    };
    auto piece = [&](std::string text) {
      const int slot = next_slot_++;
      plan.pieces.push_back({std::move(text), slot});
      return slot;
    };
    if (injection == "overlap") {
      // "CYP3A4 inhibitors" with the nested "CYP3A4" also annotated.
      const int a = piece(choose(rng_, spec_.enzymes));
      const int b = piece(choose(rng_, kHeads));
      add_mention({{a, b}});
      add_mention({{a, a}});
      return ids;
    }
    if (injection == "coordination") {
      std::string x = choose(rng_, spec_.enzymes), y = choose(rng_, spec_.enzymes);
      while (y == x) y = choose(rng_, spec_.enzymes);
      const int sx = piece(x);
      plan.pieces.push_back({"and"});
      const int sy = piece(y);
      const int sh = piece(choose(rng_, kHeads));
      add_mention({{sx, sx}, {sh, sh}});  // "X inhibitors", discontiguous
      add_mention({{sy, sh}});            // "Y inhibitors"
      return ids;
    }
    std::vector<std::string> names;
    while (names.size() < count) {
      const auto& n = choose(rng_, spec_.precipitants);
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (k > 0) plan.pieces.push_back({k + 1 == names.size() ? "and" : ","});
      const int slot = piece(names[k]);
      add_mention({{slot, slot}});
    }
    return ids;
  }

  ClausePlan build_clause(const Shape& shape, const std::string& ld, const std::optional<std::string>& injection) {
    ClausePlan plan;
    plan.injection = injection;
    auto trigger = [&](const std::string& text) {
      const int slot = next_slot_++;
      plan.pieces.push_back({text, slot});
      plan.mentions.push_back({MentionKind::Trigger, {{slot, slot}}});
    };

    if (shape.kind == Clause::PD) {
      const bool lead_with_label = pick(rng_, 2) == 0;
      if (lead_with_label) {
        plan.pieces.push_back({"the use of"});
        plan.pieces.push_back({ld});
        plan.pieces.push_back({"in patients receiving"});
      }
      auto precs = precipitant_list(plan, shape.precipitants, injection);
      if (shape.triggers) {
        const std::size_t k = pick(rng_, kPdTriggers.size());
        plan.pieces.push_back({kPdTriggerLead[k]});
        trigger(kPdTriggers[k]);
      } else {
        plan.pieces.push_back({choose(rng_, kPdConnectives)});
      }
      std::vector<std::size_t> effects;
      std::vector<std::string> names;
      while (names.size() < shape.effects) {
        const auto& e = choose(rng_, spec_.effects);
        if (std::find(names.begin(), names.end(), e) == names.end()) names.push_back(e);
      }
      for (std::size_t k = 0; k < names.size(); ++k) {
        if (k > 0) plan.pieces.push_back({"and"});
        const int slot = next_slot_++;
        plan.pieces.push_back({names[k], slot});
        plan.mentions.push_back({MentionKind::SpecificInteraction, {{slot, slot}}});
        effects.push_back(plan.mentions.size() - 1);
      }
      if (!lead_with_label) {
        plan.pieces.push_back({"when given with"});
        plan.pieces.push_back({ld});
      }
      for (auto p : precs)
        for (auto e : effects) plan.interactions.push_back({p, e, std::nullopt});
    } else if (shape.kind == Clause::PK) {
      const auto& entry = codes_.at(pick(rng_, codes_.size()));
      const bool up = entry.direction == Direction::Increase;
      if (shape.triggers) {
        auto precs = precipitant_list(plan, shape.precipitants, injection);
        trigger(choose(rng_, up ? kIncreaseVerbs : kDecreaseVerbs));
        plan.pieces.push_back({"the " + entry.measure + " of"});
        plan.pieces.push_back({ld});
        for (auto p : precs) plan.interactions.push_back({p, std::nullopt, entry.code});
      } else {
        plan.pieces.push_back({"the " + entry.measure + " of"});
        plan.pieces.push_back({ld});
        plan.pieces.push_back({std::string("was ") + (up ? "higher" : "lower") + " in the presence of"});
        auto precs = precipitant_list(plan, shape.precipitants, injection);
        for (auto p : precs) plan.interactions.push_back({p, std::nullopt, entry.code});
      }
    } else {
      if (shape.triggers) {
        const std::size_t k = pick(rng_, kUnTriggers.size());
        trigger(kUnTriggers[k]);
        plan.pieces.push_back({kUnTriggerTail[k]});
        plan.pieces.push_back({ld});
        plan.pieces.push_back({"with"});
      } else {
        plan.pieces.push_back({ld});
        plan.pieces.push_back({"has not been evaluated with"});
      }
      auto precs = precipitant_list(plan, shape.precipitants, injection);
      for (auto p : precs) plan.interactions.push_back({p, std::nullopt, std::nullopt});
    }
    return plan;
  }

 private:
  const GeneratorSpec& spec_;
  const CodeVocabulary& codes_;
  std::mt19937_64 rng_;
  double quota_carry_ = 0.0;
  std::array<std::size_t, 3> mention_counts_{};
  std::array<std::size_t, 3> interaction_counts_{};
  int next_slot_ = 0;
};

}  // namespace

void GeneratorSpec::check() const {
  auto stochastic = [](const std::array<double, 3>& v, const char* name) {
    double sum = 0.0;
    for (double x : v) {
      if (!(x >= 0.0)) throw UsageError(std::string("generator: ") + name + " has a negative component");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw UsageError(std::string("generator: ") + name + " does not sum to 1");
  };
  stochastic(mention_mixture, "mention mixture");
  stochastic(interaction_mixture, "interaction mixture");
  for (double r : {annotated_proportion, overlap_rate, coordination_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw UsageError("generator: rates and proportions must lie in [0, 1]");
  }
  if (labels == 0 || sentences_per_label == 0) throw UsageError("generator: labels and sentences_per_label must be positive");
  if (min_words == 0 || max_words < min_words) throw UsageError("generator: need 0 < min_words <= max_words");
  const bool effects = mention_mixture[2] > 0.0;
  const bool pd = interaction_mixture[0] > 0.0;
  if (effects != pd) {
    throw UsageError(effects ? "generator: effects requested but the PD mixture is 0"
                             : "generator: PD interactions requested but the effect mixture is 0");
  }
  if (annotated_proportion > 0.0 && mention_mixture[1] == 0.0)
    throw UsageError("generator: annotated sentences need precipitants");
  // Templates carry at most one trigger per clause and at least one precipitant.
  if (mention_mixture[0] > mention_mixture[1]) throw UsageError("generator: more triggers than precipitants requested");
  if (precipitants.size() < 3 || effects_list_too_small(*this) || enzymes.size() < 2)
    throw UsageError("generator: word lists too small (need 3 precipitants, 2 effects, 2 enzymes)");
}

GeneratorSpec default_generator_spec() {
  GeneratorSpec s;
  s.precipitants = {"ketoconazole", "itraconazole", "rifampin",    "digitalis",     "warfarin",      "phenytoin",
                    "carbamazepine", "clarithromycin", "fluconazole", "cimetidine",  "omeprazole",    "amiodarone",
                    "verapamil",    "diltiazem",      "lithium",     "aspirin",      "ritonavir",     "quinidine",
                    "cyclosporine", "probenecid",     "antacids",    "loop diuretics", "beta blockers", "NSAIDs",
                    "anticoagulants", "St. John's Wort", "grapefruit juice", "MAO inhibitors", "insulin", "alcohol"};
  s.enzymes = {"CYP3A4", "CYP2D6", "CYP2C9", "CYP1A2", "CYP2C19", "P-gp", "OATP1B1"};
  s.effects = {"ventricular fibrillation", "hypotension",        "QT prolongation",    "serotonin syndrome",
               "bleeding",                 "hypoglycemia",       "myopathy",           "CNS depression",
               "hyperkalemia",             "seizures",           "bradycardia",        "renal toxicity"};
  return s;
}

CorpusFile generate_corpus(const GeneratorSpec& spec, const CodeVocabulary& codes) {
  spec.check();
  if (spec.interaction_mixture[1] > 0.0 && codes.size() == 0)
    throw UsageError("generator: PK interactions requested but the code vocabulary is empty");
  Generator g(spec, codes);
  return g.run();
}

double CorpusStats::annotated_proportion() const {
  return sentences ? static_cast<double>(annotated) / static_cast<double>(sentences) : 0.0;
}

double CorpusStats::mean_words() const {
  return sentences ? static_cast<double>(words) / static_cast<double>(sentences) : 0.0;
}

namespace {
std::array<double, 3> normalize(const std::array<std::size_t, 3>& c) {
  const double total = static_cast<double>(c[0] + c[1] + c[2]);
  std::array<double, 3> out{};
  if (total > 0)
    for (int k = 0; k < 3; ++k) out[k] = static_cast<double>(c[k]) / total;
  return out;
}
}  // namespace

std::array<double, 3> CorpusStats::mention_mixture() const { return normalize(mentions); }
std::array<double, 3> CorpusStats::interaction_mixture() const { return normalize(interactions); }

CorpusStats corpus_stats(const CorpusFile& corpus) {
  CorpusStats st;
  for (const auto& l : corpus.labels) {
    for (const auto& s : l.sentences) {
      ++st.sentences;
      st.words += tagging::tokenize(s.text).size();
      if (!s.mentions.empty() || !s.interactions.empty()) ++st.annotated;
      for (const auto& m : s.mentions) ++st.mentions[static_cast<std::size_t>(m.kind)];
      for (const auto& in : s.interactions) ++st.interactions[static_cast<std::size_t>(in.kind())];
    }
  }
  return st;
}

}  // namespace ddi::corpus
