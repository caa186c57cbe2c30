#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddi/annot.hpp"

// The sequence-tagging reduction: gold mentions and interaction types are
// encoded as one of eleven IOB tags per token, and predicted tag sequences
// are decoded back into mentions.
namespace ddi::tagging {

struct Token {
  std::string text;
  Span span;
  bool is_label_drug = false;

  bool operator==(const Token&) const = default;
};

inline constexpr std::string_view kLabelDrug = "LABELDRUG";
inline constexpr std::string_view kPrecipitantToken = "PRECIPITANT";
inline constexpr std::string_view kEffectToken = "EFFECT";

/// O plus {B,I} x {T, E, D, K, U}. Values are the classifier's class indices.
enum class Tag : std::uint8_t { O = 0, B_T, I_T, B_E, I_E, B_D, I_D, B_K, I_K, B_U, I_U };
inline constexpr std::size_t kTagCount = 11;

std::string_view to_string(Tag t);
Tag parse_tag(std::string_view s);
/// 'T', 'E', 'D', 'K', 'U', or 0 for O.
char tag_type(Tag t);
bool is_begin(Tag t);
bool is_inside(Tag t);
Tag begin_tag(char type);
Tag inside_tag(char type);

enum class WeightClass { Primary, Auxiliary };

struct TagSequence {
  std::string sentence_id;
  std::vector<Token> tokens;
  std::vector<Tag> tags;
  WeightClass weight_class = WeightClass::Primary;
};

/// Splits on whitespace, then peels leading and trailing punctuation into
/// single-character tokens. Hyphens and other inner characters stay put.
std::vector<Token> tokenize(std::string_view text);

struct BindingContext {
  std::string drug;
  std::vector<std::string> aliases;
  std::vector<std::string> class_proxies;
  bool use_class_proxies = false;
};

BindingContext binding_for(const DrugLabel& label, const std::vector<std::string>& class_proxies = {},
                           bool use_class_proxies = false);

/// Replaces case-insensitive longest matches of the drug name or aliases
/// with a single LABELDRUG token spanning the matched surface. When nothing
/// matches and proxies are enabled, the class proxy terms are bound instead.
std::vector<Token> bind_label_drug(std::vector<Token> tokens, const BindingContext& ctx);

enum class DropReason { Overlap, Discontiguous, Coordination, MixedKind, TokenizationMismatch, NoInteraction };
std::string_view to_string(DropReason r);

struct DropRecord {
  std::string sentence_id;
  std::string mention_id;
  std::string interaction_id;  // set for MixedKind
  DropReason reason;
};

struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  bool overlaps(const TokenRange& o) const { return begin < o.end && o.begin < end; }
  auto operator<=>(const TokenRange&) const = default;
};

struct EncodedMention {
  MentionKind kind;
  std::optional<InteractionKind> interaction_kind;  // precipitants only
  SpanList spans;                                   // always one contiguous span
  TokenRange tokens;
  std::vector<std::string> source_ids;  // >1 when coordinated mentions were merged
};

struct EncodedRelation {
  std::string interaction_id;
  std::size_t precipitant;             // index into EncodeReport::kept
  InteractionKind kind;
  std::optional<std::size_t> effect;   // PD
  std::optional<std::string> code;     // PK
};

struct EncodeReport {
  std::vector<EncodedMention> kept;
  std::vector<EncodedRelation> relations;
  std::vector<DropRecord> dropped;
};

struct EncodeOptions {
  /// Merge coordinated disjoint precipitants ("X and Y inducers") into one
  /// span instead of keeping only the trailing contiguous constituent.
  bool merge_coordination = false;
  WeightClass weight_class = WeightClass::Primary;
};

struct EncodeResult {
  TagSequence sequence;
  EncodeReport report;
};

EncodeResult encode(const Sentence& sentence, const BindingContext& ctx, const EncodeOptions& options = {});

/// Canonical IOB repair: an orphan I-X opens a new X run, and I-Y directly
/// after an X run closes it and opens a Y run.
std::vector<Tag> repair(std::span<const Tag> tags);

struct DecodedMention {
  Mention mention;
  std::optional<InteractionKind> interaction_kind;
  TokenRange tokens;
};

struct Decoded {
  std::vector<DecodedMention> mentions;
  std::vector<Tag> repaired;
};

Decoded decode(const TagSequence& seq, std::string_view sentence_text);

/// Token range whose first start and last end match the mention's outer
/// bounds, or nullopt when a bound falls inside a token.
std::optional<TokenRange> token_range(const std::vector<Token>& tokens, const SpanList& spans);

/// Collapses the target tokens into one PRECIPITANT token and, when given,
/// the secondary tokens into one EFFECT token.
std::vector<Token> entity_bind(const std::vector<Token>& tokens, TokenRange target,
                               std::optional<TokenRange> secondary = std::nullopt);
/// Mention-based overload; throws OffsetError naming a mention that does not
/// lie on token boundaries.
std::vector<Token> entity_bind(const std::vector<Token>& tokens, const Mention& target,
                               const Mention* secondary = nullptr);

}  // namespace ddi::tagging
