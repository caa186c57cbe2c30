#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ddi/annot.hpp"
#include "ddi/corpus.hpp"
#include "ddi/model.hpp"
#include "ddi/tagging.hpp"

// End-to-end prediction: tag, decode, classify outcomes, then the
// post-processing rules (modifier strip, purge, coordination split).
namespace ddi::infer {

struct InferConfig {
  std::vector<std::string> modifiers{"moderate", "strong", "potent"};
  std::vector<std::string> stopwords{"a",   "an",    "the",  "of",   "and",  "or",    "with", "in",  "to",
                                     "for", "other", "such", "as",   "some", "these", "those", "any", "all"};
  std::vector<std::string> generic_terms{"drugs", "agents"};
  std::vector<std::string> class_proxies;
  bool use_class_proxies = false;
  /// Split "X and Y inducers" predictions into one mention per conjunct.
  bool coordination = false;
  std::vector<std::string> coordination_heads{"inhibitors", "inducers", "substrates",
                                              "blockers",   "agonists", "antagonists"};
  double pd_threshold = 0.5;

  /// Lowercases and deduplicates every list (order of first occurrence kept).
  void normalize();
  /// Throws UsageError if a list is not lowercase and deduplicated or the threshold is outside (0, 1).
  void check() const;
};

struct PostRuleStats {
  std::size_t stripped = 0;       // mentions that lost leading modifiers
  std::size_t emptied = 0;        // mentions dropped because nothing was left
  std::size_t purged = 0;         // stopword/generic-only precipitants dropped
  std::size_t split = 0;          // coordinated mentions split
  std::size_t interactions_dropped = 0;

  PostRuleStats& operator+=(const PostRuleStats& o);
};

/// One mention per conjunct for `A (, B)* and|or C HEAD` where HEAD is a
/// configured head term: the last conjunct is contiguous (C HEAD), earlier
/// ones are discontiguous (A + HEAD). Other mentions come back unchanged.
std::vector<Mention> split_coordination(const Mention& mention, std::string_view sentence_text,
                                        const std::vector<std::string>& heads);

/// Modifier strip, purge, then (when enabled) coordination split. Mentions
/// and interactions are renumbered M1.., I1... Idempotent.
PostRuleStats apply_post_rules(Sentence& sentence, const InferConfig& config);

/// Predicted annotations for one sentence. Sentences longer than the model's
/// n are tagged in overlapping windows (stride n/2, most confident wins).
Sentence predict_sentence(model::Model& model, const Sentence& skeleton, const tagging::BindingContext& binding,
                          const InferConfig& config, PostRuleStats* stats = nullptr);

/// Same skeleton (labels, sections, ids, texts) with predicted annotations and provenance "predicted".
CorpusFile predict_corpus(model::Model& model, const CorpusFile& corpus, const InferConfig& config,
                          PostRuleStats* stats = nullptr);

/// Annotation-free copy of a corpus.
CorpusFile skeleton(const CorpusFile& corpus);

}  // namespace ddi::infer
