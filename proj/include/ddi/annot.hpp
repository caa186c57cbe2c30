#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Span-exact annotation model for drug-label sentences. Offsets are
// sentence-relative, end-exclusive, and count Unicode scalar values.
namespace ddi {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  auto operator<=>(const Span&) const = default;
};

using SpanList = std::vector<Span>;

bool spans_overlap(const SpanList& a, const SpanList& b);

enum class MentionKind { Trigger, Precipitant, SpecificInteraction };
enum class InteractionKind { PD, PK, UN };
enum class Direction { Increase, Decrease };

std::string_view to_string(MentionKind k);
std::string_view to_string(InteractionKind k);
std::string_view to_string(Direction d);
MentionKind parse_mention_kind(std::string_view s);
InteractionKind parse_interaction_kind(std::string_view s);
Direction parse_direction(std::string_view s);

struct Mention {
  std::string id;
  MentionKind kind = MentionKind::Precipitant;
  SpanList spans;
  std::string text;

  bool operator==(const Mention&) const = default;
};

/// PD outcome: the SpecificInteraction mention describing the effect.
struct EffectLink {
  std::string effect_id;
  bool operator==(const EffectLink&) const = default;
};

/// PK outcome: an NCI Thesaurus code (or a COARSE_* marker in mapped corpora).
struct PkCode {
  std::string code;
  bool operator==(const PkCode&) const = default;
};

/// UN interactions carry no outcome.
struct NoOutcome {
  bool operator==(const NoOutcome&) const = default;
};

using Outcome = std::variant<NoOutcome, EffectLink, PkCode>;

/// The interaction kind is determined by the outcome alternative, so a PD
/// interaction without an effect link cannot be built.
struct Interaction {
  std::string id;
  std::string precipitant_id;
  Outcome outcome;

  InteractionKind kind() const;
  bool operator==(const Interaction&) const = default;
};

struct Sentence {
  std::string id;
  std::string section;
  std::string text;
  std::vector<Mention> mentions;
  std::vector<Interaction> interactions;

  const Mention* find_mention(std::string_view mention_id) const;
  bool operator==(const Sentence&) const = default;
};

struct DrugLabel {
  std::string id;
  std::string drug;
  std::vector<std::string> aliases;
  std::vector<Sentence> sentences;

  bool operator==(const DrugLabel&) const = default;
};

inline constexpr std::string_view kCoarseIncrease = "COARSE_INCREASE";
inline constexpr std::string_view kCoarseDecrease = "COARSE_DECREASE";

bool is_coarse_marker(std::string_view code);
std::string coarse_marker(Direction d);
std::optional<Direction> coarse_direction(std::string_view code);

/// The PK outcome vocabulary: ordered NCI codes with their direction and a
/// short description of the measurement they refer to. Index order defines
/// the classifier's class order.
class CodeVocabulary {
 public:
  struct Entry {
    std::string code;
    Direction direction;
    std::string measure;
  };

  CodeVocabulary() = default;
  explicit CodeVocabulary(std::vector<Entry> entries);

  /// Placeholder 20-code vocabulary shipped with the library (mirrors data/nci_pk_codes.txt).
  static CodeVocabulary placeholder();
  /// Text format: one "CODE increase|decrease measure words..." per line, '#' comments.
  static CodeVocabulary parse(std::string_view text);
  static CodeVocabulary load(const std::string& path);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& at(std::size_t i) const { return entries_.at(i); }
  bool contains(std::string_view code) const;
  std::optional<std::size_t> index_of(std::string_view code) const;
  std::optional<Direction> direction_of(std::string_view code) const;
  std::string serialize() const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// True when `code` has the shape 'C' followed by one or more digits.
bool is_nci_code_syntax(std::string_view code);

struct ValidationOptions {
  /// Accept COARSE_* PK markers (only for corpora with provenance "mapped").
  bool allow_coarse_markers = false;
};

std::vector<std::string> validate(const Sentence& sentence, const CodeVocabulary& codes,
                                  const ValidationOptions& options = {});
std::vector<std::string> validate(const DrugLabel& label, const CodeVocabulary& codes,
                                  const ValidationOptions& options = {});

/// Covered text of a mention: span substrings joined by a single space.
/// Throws OffsetError naming the mention when a span is out of bounds.
std::string covered_text(const Sentence& sentence, const Mention& mention);
std::string covered_text(std::u32string_view text, const SpanList& spans);

}  // namespace ddi
