#include "ddi/annot.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi {

bool spans_overlap(const SpanList& a, const SpanList& b) {
  for (const auto& x : a)
    for (const auto& y : b)
      if (x.overlaps(y)) return true;
  return false;
}

std::string_view to_string(MentionKind k) {
  switch (k) {
    case MentionKind::Trigger: return "Trigger";
    case MentionKind::Precipitant: return "Precipitant";
    case MentionKind::SpecificInteraction: return "SpecificInteraction";
  }
  return "?";
}

std::string_view to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::PD: return "PD";
    case InteractionKind::PK: return "PK";
    case InteractionKind::UN: return "UN";
  }
  return "?";
}

std::string_view to_string(Direction d) { return d == Direction::Increase ? "increase" : "decrease"; }

MentionKind parse_mention_kind(std::string_view s) {
  if (s == "Trigger") return MentionKind::Trigger;
  if (s == "Precipitant") return MentionKind::Precipitant;
  if (s == "SpecificInteraction") return MentionKind::SpecificInteraction;
  throw ParseError("unknown mention kind '" + std::string(s) + "'");
}

InteractionKind parse_interaction_kind(std::string_view s) {
  if (s == "PD") return InteractionKind::PD;
  if (s == "PK") return InteractionKind::PK;
  if (s == "UN") return InteractionKind::UN;
  throw ParseError("unknown interaction kind '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "increase" || s == "Increase") return Direction::Increase;
  if (s == "decrease" || s == "Decrease") return Direction::Decrease;
  throw ParseError("unknown direction '" + std::string(s) + "'");
}

InteractionKind Interaction::kind() const {
  switch (outcome.index()) {
    case 1: return InteractionKind::PD;
    case 2: return InteractionKind::PK;
    default: return InteractionKind::UN;
  }
}

const Mention* Sentence::find_mention(std::string_view mention_id) const {
  for (const auto& m : mentions)
    if (m.id == mention_id) return &m;
  return nullptr;
}

bool is_coarse_marker(std::string_view code) { return code == kCoarseIncrease || code == kCoarseDecrease; }

std::string coarse_marker(Direction d) {
  return std::string(d == Direction::Increase ? kCoarseIncrease : kCoarseDecrease);
}

std::optional<Direction> coarse_direction(std::string_view code) {
  if (code == kCoarseIncrease) return Direction::Increase;
  if (code == kCoarseDecrease) return Direction::Decrease;
  return std::nullopt;
}

bool is_nci_code_syntax(std::string_view code) {
  if (code.size() < 2 || code[0] != 'C') return false;
  return std::all_of(code.begin() + 1, code.end(), [](char c) { return c >= '0' && c <= '9'; });
}

CodeVocabulary::CodeVocabulary(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!is_nci_code_syntax(e.code)) throw ParseError("malformed NCI code '" + e.code + "'");
    if (!index_.emplace(e.code, i).second) throw ParseError("duplicate NCI code '" + e.code + "'");
  }
}

CodeVocabulary CodeVocabulary::placeholder() {
  static const char* kMeasures[] = {"AUC",        "clearance", "half-life", "serum concentration",
                                    "bioavailability", "absorption", "Cmax", "Tmax",
                                    "exposure",   "trough concentration"};
  std::vector<Entry> entries;
  for (int i = 0; i < 20; ++i) {
    entries.push_back({"C" + std::to_string(54602 + i), i % 2 ? Direction::Decrease : Direction::Increase,
                       kMeasures[i / 2]});
  }
  return CodeVocabulary(std::move(entries));
}

CodeVocabulary CodeVocabulary::parse(std::string_view text) {
  std::vector<Entry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Entry e;
    std::string dir;
    if (!(fields >> e.code >> dir)) throw ParseError("expected 'CODE DIRECTION [MEASURE]'", line_no, 1);
    try {
      e.direction = parse_direction(dir);
    } catch (const ParseError& err) {
      throw ParseError(err.what(), line_no, 1);
    }
    std::string word;
    while (fields >> word) e.measure += (e.measure.empty() ? "" : " ") + word;
    entries.push_back(std::move(e));
  }
  return CodeVocabulary(std::move(entries));
}

CodeVocabulary CodeVocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open code vocabulary '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool CodeVocabulary::contains(std::string_view code) const { return index_.find(code) != index_.end(); }

std::optional<std::size_t> CodeVocabulary::index_of(std::string_view code) const {
  auto it = index_.find(code);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Direction> CodeVocabulary::direction_of(std::string_view code) const {
  auto i = index_of(code);
  if (!i) return std::nullopt;
  return entries_[*i].direction;
}

std::string CodeVocabulary::serialize() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.code + " " + std::string(to_string(e.direction));
    if (!e.measure.empty()) out += " " + e.measure;
    out += "\n";
  }
  return out;
}

std::string covered_text(std::u32string_view text, const SpanList& spans) {
  std::u32string out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start > s.end || s.end > text.size()) {
      throw OffsetError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                        ") out of bounds for text of length " + std::to_string(text.size()));
    }
    if (i) out.push_back(U' ');
    out.append(text.substr(s.start, s.end - s.start));
  }
  return utf8::encode(out);
}

std::string covered_text(const Sentence& sentence, const Mention& mention) {
  try {
    return covered_text(utf8::decode(sentence.text), mention.spans);
  } catch (const OffsetError& e) {
    throw OffsetError("mention " + mention.id + ": " + e.what());
  }
}

std::vector<std::string> validate(const Sentence& s, const CodeVocabulary& codes,
                                  const ValidationOptions& options) {
  std::vector<std::string> out;
  const std::string where = "sentence " + s.id;
  std::u32string text;
  try {
    text = utf8::decode(s.text);
  } catch (const ParseError& e) {
    out.push_back(where + ": text is not valid UTF-8: " + e.what());
    return out;
  }

  std::set<std::string> ids;
  for (const auto& m : s.mentions) {
    const std::string mw = where + ": mention " + m.id;
    if (m.id.empty()) out.push_back(where + ": mention with empty id");
    if (!ids.insert(m.id).second) out.push_back(mw + ": duplicate mention id");
    if (m.spans.empty()) {
      out.push_back(mw + ": no spans");
      continue;
    }
    bool spans_ok = true;
    for (std::size_t i = 0; i < m.spans.size(); ++i) {
      const auto& sp = m.spans[i];
      if (sp.start >= sp.end) {
        out.push_back(mw + ": empty span [" + std::to_string(sp.start) + "," + std::to_string(sp.end) + ")");
        spans_ok = false;
      } else if (sp.end > text.size()) {
        out.push_back(mw + ": span [" + std::to_string(sp.start) + "," + std::to_string(sp.end) +
                      ") exceeds text length " + std::to_string(text.size()));
        spans_ok = false;
      }
      if (i > 0 && m.spans[i - 1].end > sp.start) {
        out.push_back(mw + ": spans not sorted or overlapping");
        spans_ok = false;
      }
    }
    if (spans_ok) {
      const std::string covered = covered_text(text, m.spans);
      if (covered != m.text) out.push_back(mw + ": text '" + m.text + "' differs from covered text '" + covered + "'");
    }
  }

  std::set<std::string> interaction_ids;
  for (const auto& in : s.interactions) {
    const std::string iw = where + ": interaction " + in.id;
    if (in.id.empty()) out.push_back(where + ": interaction with empty id");
    if (!interaction_ids.insert(in.id).second) out.push_back(iw + ": duplicate interaction id");
    const Mention* p = s.find_mention(in.precipitant_id);
    if (!p) {
      out.push_back(iw + ": precipitant '" + in.precipitant_id + "' does not exist");
    } else if (p->kind != MentionKind::Precipitant) {
      out.push_back(iw + ": precipitant '" + in.precipitant_id + "' is a " + std::string(to_string(p->kind)));
    }
    if (const auto* link = std::get_if<EffectLink>(&in.outcome)) {
      const Mention* e = s.find_mention(link->effect_id);
      if (!e) {
        out.push_back(iw + ": effect '" + link->effect_id + "' does not exist");
      } else if (e->kind != MentionKind::SpecificInteraction) {
        out.push_back(iw + ": PD outcome '" + link->effect_id + "' is a " + std::string(to_string(e->kind)) +
                      ", expected SpecificInteraction");
      }
    } else if (const auto* pk = std::get_if<PkCode>(&in.outcome)) {
      if (is_coarse_marker(pk->code)) {
        if (!options.allow_coarse_markers) out.push_back(iw + ": provisional code " + pk->code + " not allowed here");
      } else if (!is_nci_code_syntax(pk->code)) {
        out.push_back(iw + ": malformed NCI code '" + pk->code + "'");
      } else if (!codes.contains(pk->code)) {
        out.push_back(iw + ": code " + pk->code + " is not in the PK vocabulary");
      }
    }
  }
  return out;
}

std::vector<std::string> validate(const DrugLabel& label, const CodeVocabulary& codes,
                                  const ValidationOptions& options) {
  std::vector<std::string> out;
  const std::string where = "label " + label.id;
  if (label.drug.empty()) out.push_back(where + ": empty drug name");
  std::set<std::string> seen_alias;
  for (const auto& a : label.aliases) {
    if (a == label.drug) out.push_back(where + ": alias '" + a + "' duplicates the drug name");
    if (a.empty()) out.push_back(where + ": empty alias");
    if (!seen_alias.insert(a).second) out.push_back(where + ": duplicate alias '" + a + "'");
  }
  std::set<std::string> sentence_ids;
  for (const auto& s : label.sentences) {
    if (!sentence_ids.insert(s.id).second) out.push_back(where + ": duplicate sentence id " + s.id);
    auto v = validate(s, codes, options);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace ddi
