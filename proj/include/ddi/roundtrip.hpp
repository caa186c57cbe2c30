#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddi/corpus.hpp"
#include "ddi/score.hpp"
#include "ddi/tagging.hpp"

// Upper bound of the tagging reduction: encode gold annotations, decode the
// tags back, rebuild interactions from the kept gold links, and score.
namespace ddi::tagging {

struct RoundTripOptions {
  /// Encode coordinated precipitants as one merged span.
  bool merge_coordination = false;
  /// Split decoded "X and Y HEAD" precipitants again.
  bool split_coordination = false;
  std::vector<std::string> coordination_heads{"inhibitors", "inducers", "substrates",
                                              "blockers",   "agonists", "antagonists"};
};

struct RoundTripReport {
  scoring::ScoreReport scores;
  std::map<DropReason, std::size_t> drop_counts;
  std::vector<DropRecord> dropped;
  CorpusFile reconstructed;

  /// Score table followed by per-reason drop counts.
  std::string table() const;
  /// Scores, drop counts and every dropped mention as JSON.
  std::string to_json() const;
};

/// Rebuilds a sentence from its encoding: mentions decoded from the tags,
/// interactions taken from the encoder's kept gold relations.
Sentence reconstruct(const Sentence& gold, const EncodeResult& encoded, const RoundTripOptions& options = {});

RoundTripReport roundtrip_upperbound(const CorpusFile& gold, const RoundTripOptions& options = {});

}  // namespace ddi::tagging
