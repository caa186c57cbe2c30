#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ddi/annot.hpp"

namespace ddi {

enum class Provenance { Gold, Predicted, Synthetic, Mapped };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

/// A generator-injected case that the tag encoding is expected to lose
/// ("overlap") or to merge ("coordination").
struct Injection {
  std::string sentence_id;
  std::string kind;
  std::vector<std::string> mention_ids;

  bool operator==(const Injection&) const = default;
};

struct CorpusMetadata {
  std::optional<std::uint64_t> seed;
  std::vector<Injection> injections;
  /// "sentence_id/interaction_id" -> true NCI code for interactions whose
  /// visible outcome is a coarse marker.
  std::map<std::string, std::string> hidden_codes;

  bool empty() const { return !seed && injections.empty() && hidden_codes.empty(); }
  bool operator==(const CorpusMetadata&) const = default;
};

struct CorpusFile {
  std::string version = "ddi-corpus/1";
  Provenance provenance = Provenance::Gold;
  std::vector<DrugLabel> labels;
  CorpusMetadata metadata;

  std::size_t sentence_count() const;
  bool operator==(const CorpusFile&) const = default;
};

inline constexpr std::string_view kCorpusVersion = "ddi-corpus/1";
inline constexpr std::string_view kNlm180Version = "nlm180-coarse/1";

/// Violations across all labels plus corpus-wide sentence id uniqueness.
std::vector<std::string> validate(const CorpusFile& corpus, const CodeVocabulary& codes);

namespace corpus {

/// Parses and validates a corpus document. Throws ParseError on malformed
/// syntax or schema, ValidationError when annotations break invariants.
CorpusFile parse_corpus(std::string_view text, const CodeVocabulary& codes = CodeVocabulary::placeholder());

/// Deterministic, key-ordered JSON with a trailing newline.
std::string serialize_corpus(const CorpusFile& corpus);

CorpusFile read_corpus_file(const std::string& path, const CodeVocabulary& codes = CodeVocabulary::placeholder());

/// Word embedding table. Row 0 is always <PAD> and is kept at zero.
struct EmbeddingTable {
  std::vector<std::string> words;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t dim = 0;
  std::vector<double> matrix;  // |words| x dim, row-major

  std::size_t size() const { return words.size(); }
  const double* row(std::size_t i) const { return matrix.data() + i * dim; }
  std::optional<std::size_t> find(const std::string& word) const;
};

inline constexpr std::string_view kPadToken = "<PAD>";
inline constexpr std::string_view kUnkToken = "<UNK>";
inline constexpr std::string_view kLabelDrugToken = "LABELDRUG";

/// Parses the "V d" header text format. Reserved tokens missing from the
/// file are appended: <PAD> as zeros, the others uniform(-0.05, 0.05).
EmbeddingTable load_embeddings(std::string_view text, std::size_t expected_dim, std::uint64_t seed = 0);

struct Nlm180Record {
  std::string label_id;
  std::string drug;
  std::string section;
  std::string sentence_id;
  std::string text;
  SpanList precipitant;
  SpanList trigger;  // may be empty
  InteractionKind kind = InteractionKind::UN;
  std::optional<Direction> direction;  // PK only
};

std::vector<Nlm180Record> parse_nlm180(std::string_view text);
std::string serialize_nlm180(const std::vector<Nlm180Record>& records);

struct MapResult {
  CorpusFile corpus;
  std::vector<std::string> warnings;
};

/// Maps coarse NLM-180-style records onto the corpus schema. PD triggers
/// become effects (no Trigger mention is emitted for PD records); PK records
/// get a COARSE_* provisional outcome.
MapResult map_nlm180(const std::vector<Nlm180Record>& records);

}  // namespace corpus
}  // namespace ddi
