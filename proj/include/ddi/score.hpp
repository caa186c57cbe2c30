#pragma once

#include <map>
#include <string>
#include <vector>

#include "ddi/annot.hpp"
#include "ddi/corpus.hpp"

// Official-style evaluation: micro-averaged precision, recall and F1 under
// primary and relaxed matching, for entities and for relations.
namespace ddi::scoring {

enum class Task { Entity, Relation };
enum class Mode { Primary, Relaxed };

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
  Counts& operator+=(const Counts& o);
  bool operator==(const Counts&) const = default;
};

struct ScoreReport {
  Counts entity_primary;
  Counts entity_relaxed;
  Counts relation_primary;
  Counts relation_relaxed;

  const Counts& get(Task task, Mode mode) const;
  Counts& get(Task task, Mode mode);
  ScoreReport& operator+=(const ScoreReport& o);
  bool operator==(const ScoreReport&) const = default;

  /// Aligned plain-text table, percentages to two decimals.
  std::string table() const;
  std::string to_json() const;
};

/// Pairs sentences by id. Both sides must hold the same sentence ids with
/// identical texts; otherwise DataError lists the divergent ids.
ScoreReport score(const CorpusFile& gold, const CorpusFile& pred);

/// Scores two sentences that share id and text.
ScoreReport score_sentence(const Sentence& gold, const Sentence& pred);

struct Breakdown {
  std::map<MentionKind, Counts> entity_primary_by_kind;
  std::map<InteractionKind, Counts> relation_primary_by_kind;
  std::map<std::string, ScoreReport> by_section;

  std::string table() const;
};

Breakdown score_breakdown(const CorpusFile& gold, const CorpusFile& pred);

}  // namespace ddi::scoring
