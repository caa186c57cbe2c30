#include "ddi/roundtrip.hpp"

#include <json.hpp>

#include "ddi/infer.hpp"

namespace ddi::tagging {

Sentence reconstruct(const Sentence& gold, const EncodeResult& encoded, const RoundTripOptions& options) {
  Sentence out{gold.id, gold.section, gold.text, {}, {}};
  const Decoded decoded = decode(encoded.sequence, gold.text);
  std::map<TokenRange, std::string> id_of;
  for (const auto& dm : decoded.mentions) {
    out.mentions.push_back(dm.mention);
    id_of.emplace(dm.tokens, dm.mention.id);
  }
  const auto& kept = encoded.report.kept;
  for (const auto& r : encoded.report.relations) {
    auto p = id_of.find(kept[r.precipitant].tokens);
    if (p == id_of.end()) continue;
    Interaction in;
    in.id = "I" + std::to_string(out.interactions.size() + 1);
    in.precipitant_id = p->second;
    if (r.kind == InteractionKind::PD) {
      auto e = r.effect ? id_of.find(kept[*r.effect].tokens) : id_of.end();
      if (e == id_of.end()) continue;
      in.outcome = EffectLink{e->second};
    } else if (r.kind == InteractionKind::PK) {
      in.outcome = PkCode{r.code.value_or("")};
    }
    out.interactions.push_back(std::move(in));
  }
  if (options.split_coordination) {
    infer::InferConfig cfg;
    cfg.modifiers.clear();
    cfg.stopwords.clear();
    cfg.generic_terms.clear();
    cfg.coordination = true;
    cfg.coordination_heads = options.coordination_heads;
    infer::apply_post_rules(out, cfg);
  }
  return out;
}

RoundTripReport roundtrip_upperbound(const CorpusFile& gold, const RoundTripOptions& options) {
  RoundTripReport report;
  report.reconstructed = gold;
  report.reconstructed.provenance = Provenance::Predicted;
  report.reconstructed.metadata = {};
  EncodeOptions enc;
  enc.merge_coordination = options.merge_coordination;
  for (auto& label : report.reconstructed.labels) {
    const BindingContext ctx = binding_for(label);
    for (auto& s : label.sentences) {
      const EncodeResult r = encode(s, ctx, enc);
      for (const auto& d : r.report.dropped) {
        ++report.drop_counts[d.reason];
        report.dropped.push_back(d);
      }
      s = reconstruct(s, r, options);
    }
  }
  report.scores = scoring::score(gold, report.reconstructed);
  return report;
}

std::string RoundTripReport::table() const {
  std::string out = scores.table();
  out += "\ndropped mentions by reason\n";
  if (drop_counts.empty()) out += "  (none)\n";
  for (const auto& [reason, n] : drop_counts) out += "  " + std::string(to_string(reason)) + ": " + std::to_string(n) + "\n";
  return out;
}

std::string RoundTripReport::to_json() const {
  nlohmann::json j = nlohmann::json::parse(scores.to_json());
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [reason, n] : drop_counts) counts[std::string(to_string(reason))] = n;
  j["drop_counts"] = counts;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& d : dropped) {
    nlohmann::json e{{"sentence", d.sentence_id}, {"mention", d.mention_id}, {"reason", to_string(d.reason)}};
    if (!d.interaction_id.empty()) e["interaction"] = d.interaction_id;
    list.push_back(std::move(e));
  }
  j["dropped"] = list;
  return j.dump(2) + "\n";
}

}  // namespace ddi::tagging
