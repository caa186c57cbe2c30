#include "ddi/corpus.hpp"

#include <fstream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi {

using nlohmann::json;

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Gold: return "gold";
    case Provenance::Predicted: return "predicted";
    case Provenance::Synthetic: return "synthetic";
    case Provenance::Mapped: return "mapped";
  }
  return "?";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "gold") return Provenance::Gold;
  if (s == "predicted") return Provenance::Predicted;
  if (s == "synthetic") return Provenance::Synthetic;
  if (s == "mapped") return Provenance::Mapped;
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

std::size_t CorpusFile::sentence_count() const {
  std::size_t n = 0;
  for (const auto& l : labels) n += l.sentences.size();
  return n;
}

std::vector<std::string> validate(const CorpusFile& corpus, const CodeVocabulary& codes) {
  ValidationOptions opts;
  opts.allow_coarse_markers = corpus.provenance == Provenance::Mapped;
  std::vector<std::string> out;
  std::set<std::string> label_ids;
  std::set<std::string> sentence_ids;
  for (const auto& label : corpus.labels) {
    if (!label_ids.insert(label.id).second) out.push_back("duplicate label id " + label.id);
    for (const auto& s : label.sentences) {
      if (!sentence_ids.insert(s.id).second) out.push_back("sentence id " + s.id + " is not unique in the corpus");
    }
    auto v = validate(label, codes, opts);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

namespace corpus {
namespace {

// Schema access helpers; every failure names the JSON path.
const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + ": missing field '" + key + "'");
  return *it;
}

std::string get_string(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

const json& get_array(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array()) throw ParseError(path + "." + key + ": expected an array");
  return v;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError(path + ": unknown field '" + it.key() + "'");
  }
}

SpanList parse_spans(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path + ": expected an array of [start, end] pairs");
  SpanList out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
      throw ParseError(path + "[" + std::to_string(i) + "]: expected [start, end] with non-negative integers");
    }
    out.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>()});
  }
  return out;
}

json spans_json(const SpanList& spans) {
  json out = json::array();
  for (const auto& s : spans) out.push_back(json::array({s.start, s.end}));
  return out;
}

json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("malformed JSON", line, col);
  }
}

Mention parse_mention(const json& j, const std::string& path) {
  check_keys(j, {"id", "kind", "spans", "text"}, path);
  Mention m;
  m.id = get_string(j, "id", path);
  m.kind = parse_mention_kind(get_string(j, "kind", path));
  m.spans = parse_spans(field(j, "spans", path), path + ".spans");
  m.text = get_string(j, "text", path);
  return m;
}

Interaction parse_interaction(const json& j, const std::string& path) {
  check_keys(j, {"id", "kind", "precipitant", "effect", "code"}, path);
  Interaction in;
  in.id = get_string(j, "id", path);
  in.precipitant_id = get_string(j, "precipitant", path);
  const auto kind = parse_interaction_kind(get_string(j, "kind", path));
  const bool has_effect = j.contains("effect");
  const bool has_code = j.contains("code");
  switch (kind) {
    case InteractionKind::PD:
      if (!has_effect || has_code) throw ParseError(path + ": PD interaction needs 'effect' and no 'code'");
      in.outcome = EffectLink{get_string(j, "effect", path)};
      break;
    case InteractionKind::PK:
      if (!has_code || has_effect) throw ParseError(path + ": PK interaction needs 'code' and no 'effect'");
      in.outcome = PkCode{get_string(j, "code", path)};
      break;
    case InteractionKind::UN:
      if (has_code || has_effect) throw ParseError(path + ": UN interaction carries no outcome");
      in.outcome = NoOutcome{};
      break;
  }
  return in;
}

json mention_json(const Mention& m) {
  return json{{"id", m.id}, {"kind", std::string(to_string(m.kind))}, {"spans", spans_json(m.spans)}, {"text", m.text}};
}

json interaction_json(const Interaction& in) {
  json j{{"id", in.id}, {"kind", std::string(to_string(in.kind()))}, {"precipitant", in.precipitant_id}};
  if (const auto* e = std::get_if<EffectLink>(&in.outcome)) j["effect"] = e->effect_id;
  if (const auto* c = std::get_if<PkCode>(&in.outcome)) j["code"] = c->code;
  return j;
}

}  // namespace

CorpusFile parse_corpus(std::string_view text, const CodeVocabulary& codes) {
  const json root = parse_json_text(text);
  const std::string path = "$";
  check_keys(root, {"version", "provenance", "labels", "metadata"}, path);
  CorpusFile out;
  out.version = get_string(root, "version", path);
  if (out.version != kCorpusVersion) throw ParseError("unsupported corpus version '" + out.version + "'");
  out.provenance = parse_provenance(get_string(root, "provenance", path));

  const json& labels = get_array(root, "labels", path);
  for (std::size_t li = 0; li < labels.size(); ++li) {
    const std::string lp = "$.labels[" + std::to_string(li) + "]";
    const json& lj = labels[li];
    check_keys(lj, {"id", "drug", "aliases", "sections"}, lp);
    DrugLabel label;
    label.id = get_string(lj, "id", lp);
    label.drug = get_string(lj, "drug", lp);
    for (const auto& a : get_array(lj, "aliases", lp)) {
      if (!a.is_string()) throw ParseError(lp + ".aliases: expected strings");
      label.aliases.push_back(a.get<std::string>());
    }
    const json& sections = get_array(lj, "sections", lp);
    for (std::size_t si = 0; si < sections.size(); ++si) {
      const std::string sp = lp + ".sections[" + std::to_string(si) + "]";
      check_keys(sections[si], {"name", "sentences"}, sp);
      const std::string name = get_string(sections[si], "name", sp);
      const json& sentences = get_array(sections[si], "sentences", sp);
      for (std::size_t k = 0; k < sentences.size(); ++k) {
        const std::string p = sp + ".sentences[" + std::to_string(k) + "]";
        const json& sj = sentences[k];
        check_keys(sj, {"id", "text", "mentions", "interactions"}, p);
        Sentence s;
        s.id = get_string(sj, "id", p);
        s.section = name;
        s.text = get_string(sj, "text", p);
        const json& ms = get_array(sj, "mentions", p);
        for (std::size_t mi = 0; mi < ms.size(); ++mi)
          s.mentions.push_back(parse_mention(ms[mi], p + ".mentions[" + std::to_string(mi) + "]"));
        const json& is = get_array(sj, "interactions", p);
        for (std::size_t ii = 0; ii < is.size(); ++ii)
          s.interactions.push_back(parse_interaction(is[ii], p + ".interactions[" + std::to_string(ii) + "]"));
        label.sentences.push_back(std::move(s));
      }
    }
    out.labels.push_back(std::move(label));
  }

  if (root.contains("metadata")) {
    const json& mj = root["metadata"];
    const std::string mp = "$.metadata";
    check_keys(mj, {"seed", "injections", "hidden_codes"}, mp);
    if (mj.contains("seed")) {
      if (!mj["seed"].is_number_unsigned()) throw ParseError(mp + ".seed: expected an unsigned integer");
      out.metadata.seed = mj["seed"].get<std::uint64_t>();
    }
    if (mj.contains("injections")) {
      const json& inj = get_array(mj, "injections", mp);
      for (std::size_t i = 0; i < inj.size(); ++i) {
        const std::string ip = mp + ".injections[" + std::to_string(i) + "]";
        check_keys(inj[i], {"sentence", "kind", "mentions"}, ip);
        Injection x;
        x.sentence_id = get_string(inj[i], "sentence", ip);
        x.kind = get_string(inj[i], "kind", ip);
        for (const auto& m : get_array(inj[i], "mentions", ip)) {
          if (!m.is_string()) throw ParseError(ip + ".mentions: expected strings");
          x.mention_ids.push_back(m.get<std::string>());
        }
        out.metadata.injections.push_back(std::move(x));
      }
    }
    if (mj.contains("hidden_codes")) {
      const json& hc = field(mj, "hidden_codes", mp);
      if (!hc.is_object()) throw ParseError(mp + ".hidden_codes: expected an object");
      for (auto it = hc.begin(); it != hc.end(); ++it) {
        if (!it->is_string()) throw ParseError(mp + ".hidden_codes: expected string values");
        out.metadata.hidden_codes[it.key()] = it->get<std::string>();
      }
    }
  }

  auto violations = validate(out, codes);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return out;
}

std::string serialize_corpus(const CorpusFile& corpus) {
  json labels = json::array();
  for (const auto& label : corpus.labels) {
    json sections = json::array();
    for (const auto& s : label.sentences) {
      if (sections.empty() || sections.back()["name"] != s.section) {
        sections.push_back(json{{"name", s.section}, {"sentences", json::array()}});
      }
      json mentions = json::array();
      for (const auto& m : s.mentions) mentions.push_back(mention_json(m));
      json interactions = json::array();
      for (const auto& in : s.interactions) interactions.push_back(interaction_json(in));
      sections.back()["sentences"].push_back(
          json{{"id", s.id}, {"text", s.text}, {"mentions", mentions}, {"interactions", interactions}});
    }
    labels.push_back(json{{"id", label.id}, {"drug", label.drug}, {"aliases", label.aliases}, {"sections", sections}});
  }
  json root{{"version", corpus.version},
            {"provenance", std::string(to_string(corpus.provenance))},
            {"labels", labels}};
  if (!corpus.metadata.empty()) {
    json meta = json::object();
    if (corpus.metadata.seed) meta["seed"] = *corpus.metadata.seed;
    if (!corpus.metadata.injections.empty()) {
      json inj = json::array();
      for (const auto& x : corpus.metadata.injections)
        inj.push_back(json{{"sentence", x.sentence_id}, {"kind", x.kind}, {"mentions", x.mention_ids}});
      meta["injections"] = inj;
    }
    if (!corpus.metadata.hidden_codes.empty()) meta["hidden_codes"] = corpus.metadata.hidden_codes;
    root["metadata"] = meta;
  }
  return root.dump(1, '\t') + "\n";
}

CorpusFile read_corpus_file(const std::string& path, const CodeVocabulary& codes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), codes);
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& word) const {
  auto it = index.find(word);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable load_embeddings(std::string_view text, std::size_t expected_dim, std::uint64_t seed) {
  EmbeddingTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared_rows = 0;

  if (!std::getline(in, line)) throw ParseError("empty embedding file", 1, 1);
  ++line_no;
  {
    std::istringstream header(line);
    std::size_t v = 0, d = 0;
    std::string extra;
    if (!(header >> v >> d) || (header >> extra)) throw ParseError("expected header 'V d'", line_no, 1);
    if (d != expected_dim) {
      throw ParseError("embedding width " + std::to_string(d) + " does not match expected " +
                           std::to_string(expected_dim),
                       line_no, 1);
    }
    declared_rows = v;
    table.dim = d;
  }

  while (table.words.size() < declared_rows && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    std::vector<double> values;
    std::string field;
    while (row >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("non-numeric value '" + field + "'", line_no, 1);
      }
    }
    if (values.size() != table.dim) {
      throw ParseError("row '" + token + "' has " + std::to_string(values.size()) + " values, expected " +
                           std::to_string(table.dim),
                       line_no, 1);
    }
    if (!table.index.emplace(token, table.words.size()).second) {
      throw ParseError("duplicate token '" + token + "'", line_no, 1);
    }
    table.words.push_back(token);
    table.matrix.insert(table.matrix.end(), values.begin(), values.end());
  }
  if (table.words.size() != declared_rows) {
    throw ParseError("header declares " + std::to_string(declared_rows) + " rows but file has " +
                         std::to_string(table.words.size()),
                     line_no, 1);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw ParseError("unexpected extra row", line_no, 1);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.05, 0.05);
  for (std::string_view reserved : {kPadToken, kUnkToken, kLabelDrugToken}) {
    const std::string word(reserved);
    if (table.index.count(word)) continue;
    table.index.emplace(word, table.words.size());
    table.words.push_back(word);
    for (std::size_t k = 0; k < table.dim; ++k) table.matrix.push_back(reserved == kPadToken ? 0.0 : init(rng));
  }
  return table;
}

std::vector<Nlm180Record> parse_nlm180(std::string_view text) {
  const json root = parse_json_text(text);
  check_keys(root, {"version", "records"}, "$");
  const std::string version = get_string(root, "version", "$");
  if (version != kNlm180Version) throw ParseError("unsupported NLM-180 version '" + version + "'");
  std::vector<Nlm180Record> out;
  const json& records = get_array(root, "records", "$");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string p = "$.records[" + std::to_string(i) + "]";
    const json& r = records[i];
    check_keys(r, {"label", "drug", "section", "sentence", "text", "precipitant", "trigger", "kind", "direction"}, p);
    Nlm180Record rec;
    rec.label_id = get_string(r, "label", p);
    rec.drug = get_string(r, "drug", p);
    rec.section = get_string(r, "section", p);
    rec.sentence_id = get_string(r, "sentence", p);
    rec.text = get_string(r, "text", p);
    rec.precipitant = parse_spans(field(r, "precipitant", p), p + ".precipitant");
    rec.trigger = parse_spans(field(r, "trigger", p), p + ".trigger");
    rec.kind = parse_interaction_kind(get_string(r, "kind", p));
    if (r.contains("direction")) rec.direction = parse_direction(get_string(r, "direction", p));
    if ((rec.kind == InteractionKind::PK) != rec.direction.has_value()) {
      throw ParseError(p + ": a direction is required for PK records and forbidden otherwise");
    }
    if (rec.precipitant.empty()) throw ParseError(p + ": precipitant spans are required");
    out.push_back(std::move(rec));
  }
  return out;
}

std::string serialize_nlm180(const std::vector<Nlm180Record>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    json j{{"label", r.label_id},
           {"drug", r.drug},
           {"section", r.section},
           {"sentence", r.sentence_id},
           {"text", r.text},
           {"precipitant", spans_json(r.precipitant)},
           {"trigger", spans_json(r.trigger)},
           {"kind", std::string(to_string(r.kind))}};
    if (r.direction) j["direction"] = std::string(to_string(*r.direction));
    arr.push_back(std::move(j));
  }
  return json{{"version", kNlm180Version}, {"records", arr}}.dump(1, '\t') + "\n";
}

namespace {

// Returns the id of a mention with identical kind and spans, adding one if needed.
std::string intern_mention(Sentence& s, MentionKind kind, const SpanList& spans, const std::u32string& text) {
  for (const auto& m : s.mentions)
    if (m.kind == kind && m.spans == spans) return m.id;
  Mention m;
  m.id = "M" + std::to_string(s.mentions.size() + 1);
  m.kind = kind;
  m.spans = spans;
  m.text = covered_text(text, spans);
  s.mentions.push_back(m);
  return m.id;
}

}  // namespace

MapResult map_nlm180(const std::vector<Nlm180Record>& records) {
  MapResult result;
  result.corpus.provenance = Provenance::Mapped;
  std::map<std::string, std::size_t> label_pos;
  std::map<std::string, std::pair<std::size_t, std::size_t>> sentence_pos;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.kind == InteractionKind::PD && r.trigger.empty()) {
      result.warnings.push_back("record " + std::to_string(i) + " (sentence " + r.sentence_id +
                                "): PD record without trigger span skipped");
      continue;
    }
    auto [lit, new_label] = label_pos.emplace(r.label_id, result.corpus.labels.size());
    if (new_label) result.corpus.labels.push_back(DrugLabel{r.label_id, r.drug, {}, {}});
    DrugLabel& label = result.corpus.labels[lit->second];
    auto [sit, new_sentence] = sentence_pos.emplace(r.sentence_id, std::make_pair(lit->second, label.sentences.size()));
    if (new_sentence) label.sentences.push_back(Sentence{r.sentence_id, r.section, r.text, {}, {}});
    Sentence& s = result.corpus.labels[sit->second.first].sentences[sit->second.second];
    if (s.text != r.text) throw DataError("sentence " + r.sentence_id + " appears with differing text");

    const std::u32string text = utf8::decode(s.text);
    const std::string prec = intern_mention(s, MentionKind::Precipitant, r.precipitant, text);
    Interaction in;
    in.id = "I" + std::to_string(s.interactions.size() + 1);
    in.precipitant_id = prec;
    switch (r.kind) {
      case InteractionKind::PD:
        in.outcome = EffectLink{intern_mention(s, MentionKind::SpecificInteraction, r.trigger, text)};
        break;
      case InteractionKind::PK:
        if (!r.trigger.empty()) intern_mention(s, MentionKind::Trigger, r.trigger, text);
        in.outcome = PkCode{coarse_marker(*r.direction)};
        break;
      case InteractionKind::UN:
        if (!r.trigger.empty()) intern_mention(s, MentionKind::Trigger, r.trigger, text);
        in.outcome = NoOutcome{};
        break;
    }
    s.interactions.push_back(std::move(in));
  }
  return result;
}

}  // namespace corpus
}  // namespace ddi
