#include "ddi/tagging.hpp"

#include <algorithm>
#include <numeric>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi::tagging {
namespace {

constexpr std::array<std::string_view, kTagCount> kTagNames = {"O",   "B-T", "I-T", "B-E", "I-E", "B-D",
                                                               "I-D", "B-K", "I-K", "B-U", "I-U"};
constexpr std::string_view kTypes = "TEDKU";

bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == 0xA0; }

bool is_edge_punct(char32_t c) {
  switch (c) {
    case U'.': case U',': case U';': case U':': case U'!': case U'?':
    case U'(': case U')': case U'[': case U']': case U'{': case U'}':
    case U'"': case U'\'': case 0x201C: case 0x201D: case 0x2018: case 0x2019:
      return true;
    default:
      return false;
  }
}

std::string lower_ascii(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

// Longest case-insensitive match of any phrase at each position; matched
// runs collapse into one LABELDRUG token.
std::vector<Token> bind_phrases(const std::vector<Token>& tokens, const std::vector<std::string>& phrases,
                                bool& matched) {
  std::vector<std::vector<std::string>> patterns;
  for (const auto& p : phrases) {
    std::vector<std::string> words;
    for (const auto& t : tokenize(p)) words.push_back(lower_ascii(t.text));
    if (!words.empty()) patterns.push_back(std::move(words));
  }
  std::sort(patterns.begin(), patterns.end(),
            [](const auto& a, const auto& b) { return a.size() != b.size() ? a.size() > b.size() : a < b; });

  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(lower_ascii(t.text));

  std::vector<Token> out;
  matched = false;
  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t best = 0;
    if (!tokens[i].is_label_drug) {
      for (const auto& pat : patterns) {
        if (pat.size() <= best || i + pat.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t k = 0; k < pat.size() && ok; ++k) ok = !tokens[i + k].is_label_drug && lowered[i + k] == pat[k];
        if (ok) best = pat.size();
      }
    }
    if (best == 0) {
      out.push_back(tokens[i]);
      ++i;
      continue;
    }
    out.push_back(Token{std::string(kLabelDrug), {tokens[i].span.start, tokens[i + best - 1].span.end}, true});
    matched = true;
    i += best;
  }
  return out;
}

MentionKind kind_for_type(char type) {
  switch (type) {
    case 'T': return MentionKind::Trigger;
    case 'E': return MentionKind::SpecificInteraction;
    default: return MentionKind::Precipitant;
  }
}

std::optional<InteractionKind> interaction_for_type(char type) {
  switch (type) {
    case 'D': return InteractionKind::PD;
    case 'K': return InteractionKind::PK;
    case 'U': return InteractionKind::UN;
    default: return std::nullopt;
  }
}

char type_for(MentionKind kind, std::optional<InteractionKind> ik) {
  switch (kind) {
    case MentionKind::Trigger: return 'T';
    case MentionKind::SpecificInteraction: return 'E';
    case MentionKind::Precipitant: break;
  }
  switch (*ik) {
    case InteractionKind::PD: return 'D';
    case InteractionKind::PK: return 'K';
    case InteractionKind::UN: return 'U';
  }
  return 'U';
}

}  // namespace

std::string_view to_string(Tag t) { return kTagNames.at(static_cast<std::size_t>(t)); }

Tag parse_tag(std::string_view s) {
  for (std::size_t i = 0; i < kTagNames.size(); ++i)
    if (kTagNames[i] == s) return static_cast<Tag>(i);
  throw ParseError("unknown tag '" + std::string(s) + "'");
}

char tag_type(Tag t) {
  if (t == Tag::O) return 0;
  return kTypes[(static_cast<std::size_t>(t) - 1) / 2];
}

bool is_begin(Tag t) { return t != Tag::O && (static_cast<int>(t) % 2) == 1; }
bool is_inside(Tag t) { return t != Tag::O && (static_cast<int>(t) % 2) == 0; }

Tag begin_tag(char type) {
  const auto pos = kTypes.find(type);
  if (pos == std::string_view::npos) throw ParseError(std::string("unknown tag type '") + type + "'");
  return static_cast<Tag>(1 + 2 * pos);
}

Tag inside_tag(char type) { return static_cast<Tag>(static_cast<int>(begin_tag(type)) + 1); }

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::Overlap: return "overlap";
    case DropReason::Discontiguous: return "discontiguous";
    case DropReason::Coordination: return "coordination";
    case DropReason::MixedKind: return "mixed_kind";
    case DropReason::TokenizationMismatch: return "tokenization_mismatch";
    case DropReason::NoInteraction: return "no_interaction";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  std::vector<Token> out;
  auto emit = [&](std::size_t a, std::size_t b) {
    out.push_back(Token{utf8::encode(std::u32string_view(cps).substr(a, b - a)), {a, b}, false});
  };
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    if (i >= cps.size()) break;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j])) ++j;
    std::size_t a = i, b = j;
    while (a < b && is_edge_punct(cps[a])) {
      emit(a, a + 1);
      ++a;
    }
    std::size_t trail = b;
    while (trail > a && is_edge_punct(cps[trail - 1])) --trail;
    if (a < trail) emit(a, trail);
    for (std::size_t k = trail; k < b; ++k) emit(k, k + 1);
    i = j;
  }
  return out;
}

BindingContext binding_for(const DrugLabel& label, const std::vector<std::string>& class_proxies,
                           bool use_class_proxies) {
  return BindingContext{label.drug, label.aliases, class_proxies, use_class_proxies};
}

std::vector<Token> bind_label_drug(std::vector<Token> tokens, const BindingContext& ctx) {
  std::vector<std::string> names;
  if (!ctx.drug.empty()) names.push_back(ctx.drug);
  names.insert(names.end(), ctx.aliases.begin(), ctx.aliases.end());
  bool matched = false;
  auto out = bind_phrases(tokens, names, matched);
  if (!matched && ctx.use_class_proxies && !ctx.class_proxies.empty()) {
    out = bind_phrases(tokens, ctx.class_proxies, matched);
  }
  return out;
}

std::optional<TokenRange> token_range(const std::vector<Token>& tokens, const SpanList& spans) {
  if (spans.empty()) return std::nullopt;
  const std::size_t start = spans.front().start;
  const std::size_t end = spans.back().end;
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].span.start == start) first = i;
    if (tokens[i].span.end == end) last = i;
  }
  if (!first || !last || *last < *first) return std::nullopt;
  return TokenRange{*first, *last + 1};
}

EncodeResult encode(const Sentence& sentence, const BindingContext& ctx, const EncodeOptions& options) {
  EncodeResult result;
  auto& seq = result.sequence;
  auto& report = result.report;
  seq.sentence_id = sentence.id;
  seq.weight_class = options.weight_class;
  seq.tokens = bind_label_drug(tokenize(sentence.text), ctx);
  seq.tags.assign(seq.tokens.size(), Tag::O);

  auto drop = [&](const std::string& mention_id, DropReason reason, const std::string& interaction_id = {}) {
    report.dropped.push_back({sentence.id, mention_id, interaction_id, reason});
  };

  // Interaction kind each precipitant is tagged with: the first by sentence order.
  std::map<std::string, InteractionKind> encoded_kind;
  for (const auto& in : sentence.interactions) {
    auto [it, fresh] = encoded_kind.emplace(in.precipitant_id, in.kind());
    if (!fresh && it->second != in.kind()) drop(in.precipitant_id, DropReason::MixedKind, in.id);
  }

  struct Candidate {
    EncodedMention em;
    std::size_t order;
    Span original;
  };
  std::vector<Candidate> candidates;
  std::vector<const Mention*> discontiguous;

  for (std::size_t i = 0; i < sentence.mentions.size(); ++i) {
    const Mention& m = sentence.mentions[i];
    std::optional<InteractionKind> ik;
    if (m.kind == MentionKind::Precipitant) {
      auto it = encoded_kind.find(m.id);
      if (it == encoded_kind.end()) {
        drop(m.id, DropReason::NoInteraction);
        continue;
      }
      ik = it->second;
    }
    if (m.spans.size() > 1) {
      discontiguous.push_back(&m);
      continue;
    }
    auto range = token_range(seq.tokens, m.spans);
    if (!range) {
      drop(m.id, DropReason::TokenizationMismatch);
      continue;
    }
    candidates.push_back({EncodedMention{m.kind, ik, m.spans, *range, {m.id}}, i, m.spans.front()});
  }

  // Discontiguous mentions: either merged with the contiguous constituent
  // that shares their head, or dropped.
  for (const Mention* d : discontiguous) {
    Candidate* partner = nullptr;
    if (d->kind == MentionKind::Precipitant) {
      for (auto& c : candidates) {
        const Span& cs = c.original;
        if (c.em.kind == MentionKind::Precipitant && c.em.interaction_kind == encoded_kind.at(d->id) &&
            cs.end == d->spans.back().end && cs.start >= d->spans[d->spans.size() - 2].end) {
          partner = &c;
          break;
        }
      }
    }
    if (!partner) {
      drop(d->id, DropReason::Discontiguous);
      continue;
    }
    if (!options.merge_coordination) {
      drop(d->id, DropReason::Coordination);
      continue;
    }
    Span merged{std::min(partner->em.spans.front().start, d->spans.front().start), partner->em.spans.front().end};
    auto range = token_range(seq.tokens, {merged});
    if (!range) {
      drop(d->id, DropReason::TokenizationMismatch);
      continue;
    }
    partner->em.spans = {merged};
    partner->em.tokens = *range;
    partner->em.source_ids.push_back(d->id);
  }

  // Longer mention wins under overlap; ties go to the earlier start.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = candidates[a].em.spans.front();
    const auto& sb = candidates[b].em.spans.front();
    if (sa.length() != sb.length()) return sa.length() > sb.length();
    if (sa.start != sb.start) return sa.start < sb.start;
    return candidates[a].order < candidates[b].order;
  });
  std::vector<bool> accepted(candidates.size(), false);
  std::vector<TokenRange> taken;
  for (std::size_t idx : order) {
    const auto& r = candidates[idx].em.tokens;
    bool clash = std::any_of(taken.begin(), taken.end(), [&](const TokenRange& t) { return t.overlaps(r); });
    if (clash) {
      for (const auto& id : candidates[idx].em.source_ids) drop(id, DropReason::Overlap);
      continue;
    }
    accepted[idx] = true;
    taken.push_back(r);
  }

  std::map<std::string, std::size_t> kept_index;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!accepted[i]) continue;
    auto& em = candidates[i].em;
    for (const auto& id : em.source_ids) kept_index[id] = report.kept.size();
    const char type = type_for(em.kind, em.interaction_kind);
    seq.tags[em.tokens.begin] = begin_tag(type);
    for (std::size_t t = em.tokens.begin + 1; t < em.tokens.end; ++t) seq.tags[t] = inside_tag(type);
    report.kept.push_back(std::move(em));
  }

  for (const auto& in : sentence.interactions) {
    auto p = kept_index.find(in.precipitant_id);
    if (p == kept_index.end()) continue;
    if (report.kept[p->second].interaction_kind != in.kind()) continue;
    EncodedRelation rel{in.id, p->second, in.kind(), std::nullopt, std::nullopt};
    if (const auto* link = std::get_if<EffectLink>(&in.outcome)) {
      auto e = kept_index.find(link->effect_id);
      if (e == kept_index.end()) continue;
      rel.effect = e->second;
    } else if (const auto* code = std::get_if<PkCode>(&in.outcome)) {
      rel.code = code->code;
    }
    report.relations.push_back(std::move(rel));
  }
  return result;
}

std::vector<Tag> repair(std::span<const Tag> tags) {
  std::vector<Tag> out(tags.begin(), tags.end());
  char open = 0;
  for (auto& t : out) {
    if (t == Tag::O) {
      open = 0;
    } else if (is_begin(t)) {
      open = tag_type(t);
    } else if (tag_type(t) != open) {
      open = tag_type(t);
      t = begin_tag(open);
    }
  }
  return out;
}

Decoded decode(const TagSequence& seq, std::string_view sentence_text) {
  if (seq.tokens.size() != seq.tags.size()) {
    throw ShapeError("decode: " + std::to_string(seq.tokens.size()) + " tokens but " +
                     std::to_string(seq.tags.size()) + " tags");
  }
  Decoded out;
  out.repaired = repair(seq.tags);
  const std::u32string text = utf8::decode(sentence_text);
  std::size_t i = 0;
  while (i < out.repaired.size()) {
    if (!is_begin(out.repaired[i])) {
      ++i;
      continue;
    }
    const char type = tag_type(out.repaired[i]);
    std::size_t j = i + 1;
    while (j < out.repaired.size() && out.repaired[j] == inside_tag(type)) ++j;
    DecodedMention dm;
    dm.tokens = {i, j};
    dm.interaction_kind = interaction_for_type(type);
    dm.mention.id = "M" + std::to_string(out.mentions.size() + 1);
    dm.mention.kind = kind_for_type(type);
    dm.mention.spans = {Span{seq.tokens[i].span.start, seq.tokens[j - 1].span.end}};
    dm.mention.text = covered_text(text, dm.mention.spans);
    out.mentions.push_back(std::move(dm));
    i = j;
  }
  return out;
}

std::vector<Token> entity_bind(const std::vector<Token>& tokens, TokenRange target,
                               std::optional<TokenRange> secondary) {
  auto check = [&](const TokenRange& r) {
    if (r.begin >= r.end || r.end > tokens.size()) throw OffsetError("entity_bind: token range out of bounds");
  };
  check(target);
  if (secondary) {
    check(*secondary);
    if (secondary->overlaps(target)) throw OffsetError("entity_bind: target and secondary mentions overlap");
  }
  std::vector<Token> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size();) {
    const TokenRange* r = nullptr;
    std::string_view generic;
    if (i == target.begin) {
      r = &target;
      generic = kPrecipitantToken;
    } else if (secondary && i == secondary->begin) {
      r = &*secondary;
      generic = kEffectToken;
    }
    if (!r) {
      out.push_back(tokens[i]);
      ++i;
      continue;
    }
    out.push_back(Token{std::string(generic), {tokens[r->begin].span.start, tokens[r->end - 1].span.end}, false});
    i = r->end;
  }
  return out;
}

std::vector<Token> entity_bind(const std::vector<Token>& tokens, const Mention& target, const Mention* secondary) {
  auto range_of = [&](const Mention& m) {
    auto r = token_range(tokens, m.spans);
    if (!r) throw OffsetError("entity_bind: mention " + m.id + " does not lie on token boundaries");
    return *r;
  };
  std::optional<TokenRange> sec;
  if (secondary) sec = range_of(*secondary);
  return entity_bind(tokens, range_of(target), sec);
}

}  // namespace ddi::tagging
