#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddi/annot.hpp"
#include "ddi/corpus.hpp"

// Span-level voting over the predictions of independently trained models.
namespace ddi::ensemble {

struct EntityKey {
  MentionKind kind;
  SpanList spans;
  auto operator<=>(const EntityKey&) const = default;
};

/// An interaction identified by its precipitant span, kind and outcome
/// (effect span for PD, code for PK).
struct RelationKey {
  SpanList precipitant;
  InteractionKind kind;
  SpanList effect;
  std::string code;
  auto operator<=>(const RelationKey&) const = default;
};

/// Per-sentence votes: each key maps to the indices of the input sets that
/// predicted it (a set votes at most once per key).
struct SentenceTally {
  std::string sentence_id;
  std::map<EntityKey, std::vector<std::size_t>> entities;
  std::map<RelationKey, std::vector<std::size_t>> relations;
};

/// Throws DataError unless every set has the same labels, sentence ids and texts.
void check_same_skeleton(const std::vector<CorpusFile>& sets);

std::vector<SentenceTally> tally(const std::vector<CorpusFile>& sets);

struct MergeStats {
  std::size_t entity_candidates = 0;
  std::size_t entities_kept = 0;
  std::size_t below_threshold = 0;
  std::size_t conflicts = 0;  // dropped for overlapping a better-supported entity
  std::size_t forced = 0;     // added back as arguments of kept relations
  std::size_t relation_candidates = 0;
  std::size_t relation_conflicts = 0;
  std::size_t relations_unsupported = 0;  // an argument mention conflicted with a kept entity
  std::size_t relations_kept = 0;
  /// votes -> number of entity candidates with that many votes
  std::map<std::size_t, std::size_t> vote_histogram;

  std::string table() const;
};

/// Entities and relations are voted in separate pools. Within a pool,
/// candidates with at least `min_votes` votes are visited by descending
/// votes, then start offset, kind and spans; one that overlaps an already
/// kept annotation is dropped unless some input set predicted both. A kept
/// relation whose argument mentions are missing gets them added, unless one
/// conflicts with a kept entity, in which case the relation is dropped.
/// Output ids are renumbered M1.., I1...
CorpusFile merge(const std::vector<CorpusFile>& sets, std::size_t min_votes, MergeStats* stats = nullptr);

}  // namespace ddi::ensemble
