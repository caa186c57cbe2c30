#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ddi/annot.hpp"
#include "ddi/corpus.hpp"

// Template-based synthetic drug-label corpora with controlled statistics.
namespace ddi::corpus {

struct GeneratorSpec {
  std::uint64_t seed = 1;
  std::size_t labels = 22;
  std::size_t sentences_per_label = 27;
  double annotated_proportion = 0.51;
  /// Trigger, Precipitant, SpecificInteraction.
  std::array<double, 3> mention_mixture{0.28, 0.53, 0.19};
  /// PD, PK, UN.
  std::array<double, 3> interaction_mixture{0.49, 0.21, 0.30};
  /// Per annotated clause: chance of an inner precipitant nested in an outer one.
  double overlap_rate = 0.0;
  /// Per annotated clause: chance of an "X and Y inhibitors" coordination.
  double coordination_rate = 0.0;
  /// Emit COARSE_* PK outcomes (provenance mapped) and keep the true codes
  /// in metadata.hidden_codes.
  bool coarse_pk = false;
  std::size_t min_words = 14;
  std::size_t max_words = 32;

  std::vector<std::string> label_drugs;
  std::vector<std::string> precipitants;
  std::vector<std::string> enzymes;
  std::vector<std::string> effects;

  /// Throws UsageError for non-stochastic mixtures, rates outside [0, 1],
  /// or mixtures no template combination can realize.
  void check() const;
};

/// Defaults sized like a 22-label training set, with built-in word lists.
GeneratorSpec default_generator_spec();

CorpusFile generate_corpus(const GeneratorSpec& spec, const CodeVocabulary& codes = CodeVocabulary::placeholder());

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t annotated = 0;
  std::size_t words = 0;
  std::array<std::size_t, 3> mentions{};      // Trigger, Precipitant, SpecificInteraction
  std::array<std::size_t, 3> interactions{};  // PD, PK, UN

  double annotated_proportion() const;
  double mean_words() const;
  std::array<double, 3> mention_mixture() const;
  std::array<double, 3> interaction_mixture() const;
};

CorpusStats corpus_stats(const CorpusFile& corpus);

}  // namespace ddi::corpus
