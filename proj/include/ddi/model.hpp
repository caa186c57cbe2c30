#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddi/annot.hpp"
#include "ddi/corpus.hpp"
#include "ddi/nn/graph.hpp"
#include "ddi/tagging.hpp"

// The multi-task extraction network: a shared context encoder (word
// embeddings plus a character CNN feeding a BiLSTM), an NER branch (a second
// BiLSTM and an 11-way softmax per token) and an outcome branch (a multi-window
// CNN over the context and the entity-bound sentence, with PK and PD heads).
namespace ddi::model {

struct ModelConfig {
  std::size_t word_dim = 200;
  std::size_t char_dim = 24;
  std::size_t char_filters = 50;
  std::size_t char_window = 3;
  std::size_t hidden = 100;
  std::vector<std::size_t> rel_windows{3, 4, 5};
  std::size_t rel_filters = 50;
  std::size_t ner_classes = tagging::kTagCount;
  std::size_t pk_classes = 20;
  std::size_t pd_classes = 2;
  double dropout = 0.5;
  /// n and m: longest sentence (tokens) and longest word (characters).
  /// Training replaces these with the corpus maxima.
  std::size_t max_sentence_len = 128;
  std::size_t max_word_len = 32;
  /// Feed [C ; S] to the second BiLSTM; false gives the C-only ablation.
  bool residual_words = true;
  double init_scale = 0.05;
  double forget_bias = 1.0;

  std::size_t context_dim() const { return 2 * hidden; }
  std::size_t ner_dim() const { return 2 * hidden; }
  std::size_t rel_dim() const { return rel_windows.size() * rel_filters; }

  /// Throws UsageError on a non-positive size or an out-of-range rate.
  void check() const;
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

/// Word and character vocabularies. Word ids 0..4 are <PAD>, <UNK>,
/// LABELDRUG, PRECIPITANT, EFFECT; character ids 0 and 1 are pad and unknown.
class Vocabulary {
 public:
  Vocabulary();

  static const std::vector<std::string>& reserved_words();

  /// Reserved tokens, then embedding-table words (if any), then remaining
  /// corpus words in sorted order. Characters are sorted by code point.
  static Vocabulary build(const std::vector<std::vector<tagging::Token>>& sentences,
                          const corpus::EmbeddingTable* embeddings = nullptr);

  int word_id(const std::string& word) const;
  int char_id(char32_t c) const;
  std::size_t word_count() const { return words_.size(); }
  std::size_t char_count() const { return chars_.size() + 2; }
  const std::vector<std::string>& words() const { return words_; }
  const std::u32string& chars() const { return chars_; }

  void add_word(const std::string& w);
  void add_char(char32_t c);

  bool operator==(const Vocabulary& o) const { return words_ == o.words_ && chars_ == o.chars_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> word_index_;
  std::u32string chars_;
  std::unordered_map<char32_t, int> char_index_;
};

/// Token and character ids for one sentence, padded to n and n x m.
struct Input {
  std::vector<int> words;  // n
  std::vector<int> chars;  // n * m
  std::size_t length = 0;
};

/// Nodes shared by both branches for one sentence.
struct Context {
  nn::Var S;  // [n, d]
  nn::Var C;  // [n, d_context], after dropout
  std::size_t length = 0;
};

/// Realized layer widths measured on a forward pass.
struct ShapeAudit {
  std::size_t char_composition = 0;
  std::size_t context = 0;
  std::size_t ner_hidden = 0;
  std::size_t rel = 0;
  std::size_t ner_classes = 0;
  std::size_t pk_classes = 0;
  std::size_t pd_classes = 0;
};

class Model {
 public:
  /// Builds and initializes every parameter, then runs a probe forward pass
  /// and throws ShapeError if any layer width disagrees with the config.
  Model(ModelConfig config, Vocabulary vocab, CodeVocabulary codes, std::uint64_t seed,
        const corpus::EmbeddingTable* embeddings = nullptr);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const CodeVocabulary& codes() const { return codes_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  std::mt19937_64& rng() { return rng_; }
  const ShapeAudit& audit() const { return audit_; }

  /// Throws ShapeError when the sentence has more than n tokens.
  Input make_input(const std::vector<tagging::Token>& tokens) const;

  Context context(nn::Graph& g, const Input& in, bool train);
  nn::Var ner_logits(nn::Graph& g, const Context& ctx, bool train);
  /// v over rows [scale_grad(C) ; scale_grad(S')]; `encoder_grad_scale`
  /// multiplies the gradient reaching the encoder and the embedding table.
  nn::Var outcome_vector(nn::Graph& g, const Context& ctx, const Input& bound, double encoder_grad_scale, bool train);
  nn::Var pk_logits(nn::Graph& g, nn::Var v);
  nn::Var pd_logits(nn::Graph& g, nn::Var v);

  /// Per-token tag distributions for the real tokens (inference mode).
  std::vector<std::array<double, tagging::kTagCount>> tag_distribution(const Input& in);

  friend void save_checkpoint(const Model& m, std::ostream& out);
  friend Model load_checkpoint(std::istream& in);

 private:
  struct Uninitialized {};
  Model(Uninitialized, ModelConfig config, Vocabulary vocab, CodeVocabulary codes);
  void declare_parameters();
  void initialize(const corpus::EmbeddingTable* embeddings);
  void run_audit();

  ModelConfig config_;
  Vocabulary vocab_;
  CodeVocabulary codes_;
  nn::ParamStore params_;
  std::mt19937_64 rng_;
  ShapeAudit audit_;
};

/// Weighted NER loss: sum_i w_i CE_i / sum_i w_i over real tokens, with
/// w_i = non_o_weight on gold non-O tags and 1 elsewhere, times example_weight.
nn::Var ner_loss(nn::Graph& g, nn::Var logits, const std::vector<int>& tags, std::size_t length, double non_o_weight,
                 double example_weight);

/// example_weight * CE(softmax(logits), target).
nn::Var outcome_loss(nn::Graph& g, nn::Var logits, int target, double example_weight);

void save_checkpoint(const Model& m, std::ostream& out);
Model load_checkpoint(std::istream& in);
void save_checkpoint_file(const Model& m, const std::string& path);
Model load_checkpoint_file(const std::string& path);

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

}  // namespace ddi::model
