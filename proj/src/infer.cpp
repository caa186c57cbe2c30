#include "ddi/infer.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi::infer {
namespace {

using tagging::Token;
using tagging::TokenRange;

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool contains(const std::vector<std::string>& list, const std::string& word) {
  return std::find(list.begin(), list.end(), lower(word)) != list.end();
}

// Tokens lying inside [span.start, span.end).
std::vector<Token> tokens_in(const std::vector<Token>& tokens, const Span& span) {
  std::vector<Token> out;
  for (const auto& t : tokens)
    if (t.span.start >= span.start && t.span.end <= span.end) out.push_back(t);
  return out;
}

void normalize_list(std::vector<std::string>& v) {
  std::vector<std::string> out;
  for (auto& s : v) {
    auto l = lower(s);
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(std::move(l));
  }
  v = std::move(out);
}

void check_list(const std::vector<std::string>& v, const char* name) {
  std::set<std::string> seen;
  for (const auto& s : v) {
    if (s != lower(s)) throw UsageError(std::string("infer config: ") + name + " entry '" + s + "' is not lowercase");
    if (!seen.insert(s).second) throw UsageError(std::string("infer config: ") + name + " has duplicate '" + s + "'");
  }
}

// Removes leading modifier tokens from the first span(s). Returns false when
// nothing is left.
bool strip_modifiers(Mention& m, const std::vector<Token>& tokens, const std::vector<std::string>& modifiers,
                     bool& changed) {
  while (!m.spans.empty()) {
    auto inside = tokens_in(tokens, m.spans.front());
    std::size_t k = 0;
    while (k < inside.size() && contains(modifiers, inside[k].text)) ++k;
    if (k == 0) return true;
    changed = true;
    if (k == inside.size()) {
      m.spans.erase(m.spans.begin());
      continue;
    }
    m.spans.front().start = inside[k].span.start;
    return true;
  }
  return false;
}

bool only_stopwords(const Mention& m, const std::vector<Token>& tokens, const InferConfig& c) {
  std::size_t seen = 0;
  for (const auto& sp : m.spans) {
    for (const auto& t : tokens_in(tokens, sp)) {
      ++seen;
      if (!contains(c.stopwords, t.text) && !contains(c.generic_terms, t.text)) return false;
    }
  }
  return seen > 0;
}

}  // namespace

void InferConfig::normalize() {
  normalize_list(modifiers);
  normalize_list(stopwords);
  normalize_list(generic_terms);
  normalize_list(class_proxies);
  normalize_list(coordination_heads);
}

void InferConfig::check() const {
  check_list(modifiers, "modifiers");
  check_list(stopwords, "stopwords");
  check_list(generic_terms, "generic_terms");
  check_list(class_proxies, "class_proxies");
  check_list(coordination_heads, "coordination_heads");
  if (!(pd_threshold > 0.0 && pd_threshold < 1.0)) throw UsageError("infer config: pd_threshold must lie in (0, 1)");
}

PostRuleStats& PostRuleStats::operator+=(const PostRuleStats& o) {
  stripped += o.stripped;
  emptied += o.emptied;
  purged += o.purged;
  split += o.split;
  interactions_dropped += o.interactions_dropped;
  return *this;
}

std::vector<Mention> split_coordination(const Mention& mention, std::string_view sentence_text,
                                        const std::vector<std::string>& heads) {
  if (mention.spans.size() != 1) return {mention};
  const auto tokens = tokens_in(tagging::tokenize(sentence_text), mention.spans.front());
  if (tokens.size() < 4 || !contains(heads, tokens.back().text)) return {mention};

  // Conjuncts separated by commas with one final "and"/"or" (optionally ", and").
  std::vector<std::vector<Token>> conjuncts(1);
  bool saw_and = false;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const std::string w = lower(tokens[i].text);
    const bool conj = w == "and" || w == "or";
    if (w == "," || conj) {
      if (saw_and) return {mention};
      if (conj) saw_and = true;
      if (conjuncts.back().empty()) {
        // ", and": the comma already closed the conjunct.
        if (conj && conjuncts.size() > 1) continue;
        return {mention};
      }
      conjuncts.emplace_back();
      continue;
    }
    conjuncts.back().push_back(tokens[i]);
  }
  if (!saw_and || conjuncts.size() < 2 || conjuncts.back().empty()) return {mention};

  const std::u32string text = utf8::decode(sentence_text);
  const Span head = tokens.back().span;
  std::vector<Mention> out;
  for (std::size_t j = 0; j < conjuncts.size(); ++j) {
    Mention m;
    m.id = mention.id + "." + std::to_string(j + 1);
    m.kind = mention.kind;
    const Span c{conjuncts[j].front().span.start, conjuncts[j].back().span.end};
    if (j + 1 == conjuncts.size())
      m.spans = {Span{c.start, head.end}};
    else
      m.spans = {c, head};
    m.text = covered_text(text, m.spans);
    out.push_back(std::move(m));
  }
  return out;
}

PostRuleStats apply_post_rules(Sentence& s, const InferConfig& config) {
  PostRuleStats st;
  const auto tokens = tagging::tokenize(s.text);
  const std::u32string text = utf8::decode(s.text);

  // Old mention id -> replacement ids (empty when dropped).
  std::map<std::string, std::vector<std::string>> replaced;
  std::vector<Mention> kept;
  for (Mention m : s.mentions) {
    if (m.kind != MentionKind::Precipitant) {
      replaced[m.id] = {m.id};
      kept.push_back(std::move(m));
      continue;
    }
    bool changed = false;
    if (!strip_modifiers(m, tokens, config.modifiers, changed)) {
      ++st.emptied;
      replaced[m.id] = {};
      continue;
    }
    if (changed) {
      ++st.stripped;
      m.text = covered_text(text, m.spans);
    }
    if (only_stopwords(m, tokens, config)) {
      ++st.purged;
      replaced[m.id] = {};
      continue;
    }
    std::vector<Mention> parts{m};
    if (config.coordination) parts = split_coordination(m, s.text, config.coordination_heads);
    if (parts.size() > 1) ++st.split;
    auto& ids = replaced[m.id];
    for (auto& p : parts) {
      ids.push_back(p.id);
      kept.push_back(std::move(p));
    }
  }

  // Merge mentions that became identical; renumber.
  std::map<std::string, std::string> final_id;
  std::map<std::pair<MentionKind, SpanList>, std::string> by_key;
  std::vector<Mention> mentions;
  for (auto& m : kept) {
    auto key = std::make_pair(m.kind, m.spans);
    auto it = by_key.find(key);
    if (it != by_key.end()) {
      final_id[m.id] = it->second;
      continue;
    }
    const std::string id = "M" + std::to_string(mentions.size() + 1);
    by_key.emplace(key, id);
    final_id[m.id] = id;
    m.id = id;
    mentions.push_back(std::move(m));
  }

  auto resolve = [&](const std::string& old) {
    std::vector<std::string> out;
    auto it = replaced.find(old);
    if (it == replaced.end()) return out;
    for (const auto& r : it->second) out.push_back(final_id.at(r));
    return out;
  };

  std::vector<Interaction> interactions;
  std::set<std::tuple<std::string, std::size_t, std::string>> seen;
  for (const auto& in : s.interactions) {
    const auto precs = resolve(in.precipitant_id);
    Outcome outcome = in.outcome;
    if (const auto* e = std::get_if<EffectLink>(&in.outcome)) {
      const auto eff = resolve(e->effect_id);
      if (eff.empty()) {
        ++st.interactions_dropped;
        continue;
      }
      outcome = EffectLink{eff.front()};
    }
    if (precs.empty()) {
      ++st.interactions_dropped;
      continue;
    }
    for (const auto& p : precs) {
      std::string sig;
      if (const auto* e = std::get_if<EffectLink>(&outcome)) sig = e->effect_id;
      if (const auto* c = std::get_if<PkCode>(&outcome)) sig = c->code;
      if (!seen.emplace(p, outcome.index(), sig).second) continue;
      Interaction out;
      out.id = "I" + std::to_string(interactions.size() + 1);
      out.precipitant_id = p;
      out.outcome = outcome;
      interactions.push_back(std::move(out));
    }
  }
  s.mentions = std::move(mentions);
  s.interactions = std::move(interactions);
  return st;
}

namespace {

// Scores outcome candidates, reusing one encoder pass per token window.
class OutcomeScorer {
 public:
  OutcomeScorer(model::Model& model, const std::vector<Token>& tokens) : model_(model), tokens_(tokens) {}

  std::vector<double> pk(TokenRange target) { return score(target, std::nullopt, true); }
  double pd(TokenRange target, TokenRange effect) { return score(target, effect, false)[1]; }

 private:
  struct Window {
    nn::Graph graph;
    model::Context ctx;
  };

  std::vector<double> score(TokenRange target, std::optional<TokenRange> effect, bool pk) {
    const std::size_t n = model_.config().max_sentence_len;
    std::size_t w = 0;
    if (tokens_.size() > n) {
      std::size_t lo = target.begin, hi = target.end;
      if (effect) {
        lo = std::min(lo, effect->begin);
        hi = std::max(hi, effect->end);
      }
      if (hi - lo > n) {
        lo = target.begin;
        hi = target.end;
      }
      const std::size_t slack = n - std::min(n, hi - lo);
      w = lo > slack / 2 ? lo - slack / 2 : 0;
      w = std::min(w, tokens_.size() - n);
    }
    const std::size_t end = std::min(tokens_.size(), w + n);
    auto shift = [&](TokenRange r) -> std::optional<TokenRange> {
      if (r.begin < w || r.end > end) return std::nullopt;
      return TokenRange{r.begin - w, r.end - w};
    };
    std::vector<Token> window(tokens_.begin() + static_cast<std::ptrdiff_t>(w),
                              tokens_.begin() + static_cast<std::ptrdiff_t>(end));
    auto t = shift(target);
    if (!t) throw ShapeError("outcome window does not contain the target mention");
    std::optional<TokenRange> e = effect ? shift(*effect) : std::nullopt;

    auto& slot = windows_[w];
    if (!slot) {
      slot = std::make_unique<Window>();
      slot->ctx = model_.context(slot->graph, model_.make_input(window), false);
    }
    const auto bound = model_.make_input(tagging::entity_bind(window, *t, e));
    auto& g = slot->graph;
    nn::Var v = model_.outcome_vector(g, slot->ctx, bound, 1.0, false);
    nn::Var logits = pk ? model_.pk_logits(g, v) : model_.pd_logits(g, v);
    return nn::softmax(g.value(logits).data);
  }

  model::Model& model_;
  const std::vector<Token>& tokens_;
  std::map<std::size_t, std::unique_ptr<Window>> windows_;
};

std::vector<tagging::Tag> predict_tags(model::Model& model, const std::vector<Token>& tokens) {
  const std::size_t n = model.config().max_sentence_len;
  std::vector<std::array<double, tagging::kTagCount>> best(tokens.size());
  std::vector<double> confidence(tokens.size(), -1.0);
  std::vector<std::size_t> starts;
  if (tokens.size() <= n) {
    starts = {0};
  } else {
    const std::size_t stride = std::max<std::size_t>(1, n / 2);
    for (std::size_t w = 0;; w += stride) {
      if (w + n >= tokens.size()) {
        starts.push_back(tokens.size() - n);
        break;
      }
      starts.push_back(w);
    }
  }
  for (auto w : starts) {
    const std::size_t end = std::min(tokens.size(), w + n);
    std::vector<Token> window(tokens.begin() + static_cast<std::ptrdiff_t>(w),
                              tokens.begin() + static_cast<std::ptrdiff_t>(end));
    const auto dist = model.tag_distribution(model.make_input(window));
    for (std::size_t i = 0; i < dist.size(); ++i) {
      const double c = *std::max_element(dist[i].begin(), dist[i].end());
      if (c > confidence[w + i]) {
        confidence[w + i] = c;
        best[w + i] = dist[i];
      }
    }
  }
  std::vector<tagging::Tag> tags(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto it = std::max_element(best[i].begin(), best[i].end());
    tags[i] = static_cast<tagging::Tag>(it - best[i].begin());
  }
  return tags;
}

}  // namespace

Sentence predict_sentence(model::Model& model, const Sentence& skeleton, const tagging::BindingContext& binding,
                          const InferConfig& config, PostRuleStats* stats) {
  Sentence out;
  out.id = skeleton.id;
  out.section = skeleton.section;
  out.text = skeleton.text;
  const auto tokens = tagging::bind_label_drug(tagging::tokenize(skeleton.text), binding);
  if (tokens.empty()) return out;

  tagging::TagSequence seq;
  seq.sentence_id = skeleton.id;
  seq.tokens = tokens;
  seq.tags = predict_tags(model, tokens);
  const auto decoded = tagging::decode(seq, skeleton.text);

  std::vector<std::size_t> effects;
  for (std::size_t i = 0; i < decoded.mentions.size(); ++i) {
    out.mentions.push_back(decoded.mentions[i].mention);
    if (decoded.mentions[i].mention.kind == MentionKind::SpecificInteraction) effects.push_back(i);
  }

  OutcomeScorer scorer(model, tokens);
  auto add = [&](const std::string& precipitant, Outcome outcome) {
    Interaction in;
    in.id = "I" + std::to_string(out.interactions.size() + 1);
    in.precipitant_id = precipitant;
    in.outcome = std::move(outcome);
    out.interactions.push_back(std::move(in));
  };
  for (const auto& dm : decoded.mentions) {
    if (dm.mention.kind != MentionKind::Precipitant || !dm.interaction_kind) continue;
    switch (*dm.interaction_kind) {
      case InteractionKind::UN:
        add(dm.mention.id, NoOutcome{});
        break;
      case InteractionKind::PK: {
        const auto p = scorer.pk(dm.tokens);
        const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        add(dm.mention.id, PkCode{model.codes().at(best).code});
        break;
      }
      case InteractionKind::PD: {
        std::size_t linked = 0;
        double best_score = -1.0;
        std::optional<std::size_t> best_effect;
        for (auto e : effects) {
          const double p = scorer.pd(dm.tokens, decoded.mentions[e].tokens);
          if (p >= config.pd_threshold) {
            add(dm.mention.id, EffectLink{decoded.mentions[e].mention.id});
            ++linked;
          }
          if (p > best_score) {
            best_score = p;
            best_effect = e;
          }
        }
        if (linked == 0) {
          // Fall back to the single best effect when it is reasonably likely;
          // otherwise emit the precipitant as an unspecified interaction.
          if (best_effect && best_score >= 0.5 * config.pd_threshold)
            add(dm.mention.id, EffectLink{decoded.mentions[*best_effect].mention.id});
          else
            add(dm.mention.id, NoOutcome{});
        }
        break;
      }
    }
  }
  const auto st = apply_post_rules(out, config);
  if (stats) *stats += st;
  return out;
}

CorpusFile skeleton(const CorpusFile& corpus) {
  CorpusFile out;
  out.version = corpus.version;
  out.provenance = Provenance::Predicted;
  for (const auto& l : corpus.labels) {
    DrugLabel label{l.id, l.drug, l.aliases, {}};
    for (const auto& s : l.sentences) label.sentences.push_back(Sentence{s.id, s.section, s.text, {}, {}});
    out.labels.push_back(std::move(label));
  }
  return out;
}

CorpusFile predict_corpus(model::Model& model, const CorpusFile& corpus, const InferConfig& config,
                          PostRuleStats* stats) {
  InferConfig cfg = config;
  cfg.normalize();
  cfg.check();
  CorpusFile out = skeleton(corpus);
  for (std::size_t l = 0; l < corpus.labels.size(); ++l) {
    const auto binding = tagging::binding_for(corpus.labels[l], cfg.class_proxies, cfg.use_class_proxies);
    for (std::size_t s = 0; s < corpus.labels[l].sentences.size(); ++s) {
      out.labels[l].sentences[s] = predict_sentence(model, corpus.labels[l].sentences[s], binding, cfg, stats);
    }
  }
  return out;
}

}  // namespace ddi::infer
