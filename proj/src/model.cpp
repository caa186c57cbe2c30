#include "ddi/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi::model {

using nn::Graph;
using nn::Var;

void ModelConfig::check() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw UsageError(std::string("model config: ") + name + " must be positive");
  };
  positive(word_dim, "word_dim");
  positive(char_dim, "char_dim");
  positive(char_filters, "char_filters");
  positive(char_window, "char_window");
  positive(hidden, "hidden");
  positive(rel_filters, "rel_filters");
  positive(ner_classes, "ner_classes");
  positive(pk_classes, "pk_classes");
  positive(pd_classes, "pd_classes");
  positive(max_sentence_len, "max_sentence_len");
  positive(max_word_len, "max_word_len");
  if (rel_windows.empty()) throw UsageError("model config: rel_windows must not be empty");
  for (auto w : rel_windows) positive(w, "rel_windows entry");
  if (ner_classes != tagging::kTagCount)
    throw UsageError("model config: ner_classes must be " + std::to_string(tagging::kTagCount));
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("model config: dropout must lie in [0, 1)");
  if (!(init_scale > 0.0)) throw UsageError("model config: init_scale must be positive");
}

// ---------------------------------------------------------------- vocabulary

const std::vector<std::string>& Vocabulary::reserved_words() {
  static const std::vector<std::string> r{std::string(corpus::kPadToken), std::string(corpus::kUnkToken),
                                          std::string(tagging::kLabelDrug), std::string(tagging::kPrecipitantToken),
                                          std::string(tagging::kEffectToken)};
  return r;
}

Vocabulary::Vocabulary() {
  for (const auto& w : reserved_words()) add_word(w);
}

void Vocabulary::add_word(const std::string& w) {
  if (word_index_.count(w)) return;
  word_index_.emplace(w, static_cast<int>(words_.size()));
  words_.push_back(w);
}

void Vocabulary::add_char(char32_t c) {
  if (char_index_.count(c)) return;
  char_index_.emplace(c, static_cast<int>(chars_.size()) + 2);
  chars_.push_back(c);
}

int Vocabulary::word_id(const std::string& word) const {
  auto it = word_index_.find(word);
  return it == word_index_.end() ? kUnkId : it->second;
}

int Vocabulary::char_id(char32_t c) const {
  auto it = char_index_.find(c);
  return it == char_index_.end() ? kUnkId : it->second;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<tagging::Token>>& sentences,
                             const corpus::EmbeddingTable* embeddings) {
  Vocabulary v;
  if (embeddings)
    for (const auto& w : embeddings->words) v.add_word(w);
  std::set<std::string> words;
  std::set<char32_t> chars;
  for (const auto& s : sentences)
    for (const auto& t : s) {
      words.insert(t.text);
      for (char32_t c : utf8::decode(t.text)) chars.insert(c);
    }
  for (const auto& w : words) v.add_word(w);
  for (char32_t c : chars) v.add_char(c);
  return v;
}

// ---------------------------------------------------------------- model

Model::Model(Uninitialized, ModelConfig config, Vocabulary vocab, CodeVocabulary codes)
    : config_(std::move(config)), vocab_(std::move(vocab)), codes_(std::move(codes)) {
  config_.check();
  if (config_.pk_classes != codes_.size()) {
    throw UsageError("model config: pk_classes (" + std::to_string(config_.pk_classes) +
                     ") must equal the PK code vocabulary size (" + std::to_string(codes_.size()) + ")");
  }
  declare_parameters();
}

Model::Model(ModelConfig config, Vocabulary vocab, CodeVocabulary codes, std::uint64_t seed,
             const corpus::EmbeddingTable* embeddings)
    : Model(Uninitialized{}, std::move(config), std::move(vocab), std::move(codes)) {
  rng_.seed(seed);
  initialize(embeddings);
  run_audit();
}

void Model::declare_parameters() {
  const auto& c = config_;
  const std::size_t h = c.hidden;
  params_.add("word_emb", {vocab_.word_count(), c.word_dim});
  params_.add("char_emb", {vocab_.char_count(), c.char_dim});
  params_.add("char_conv.w", {c.char_filters, c.char_window * c.char_dim});
  params_.add("char_conv.b", {c.char_filters});
  auto lstm = [&](const std::string& prefix, std::size_t in) {
    params_.add(prefix + ".wx", {4 * h, in});
    params_.add(prefix + ".wh", {4 * h, h});
    params_.add(prefix + ".b", {4 * h});
  };
  const std::size_t enc_in = c.word_dim + c.char_filters;
  lstm("enc.fwd", enc_in);
  lstm("enc.bwd", enc_in);
  const std::size_t ner_in = c.context_dim() + (c.residual_words ? c.word_dim : 0);
  lstm("ner.fwd", ner_in);
  lstm("ner.bwd", ner_in);
  params_.add("ner.out.w", {c.ner_classes, c.ner_dim()});
  params_.add("ner.out.b", {c.ner_classes});
  const std::size_t rel_in = c.context_dim() + c.word_dim;
  for (auto k : c.rel_windows) {
    const std::string p = "rel.conv" + std::to_string(k);
    params_.add(p + ".w", {c.rel_filters, k * rel_in});
    params_.add(p + ".b", {c.rel_filters});
  }
  params_.add("pk.w", {c.pk_classes, c.rel_dim()});
  params_.add("pk.b", {c.pk_classes});
  params_.add("pd.w", {c.pd_classes, c.rel_dim()});
  params_.add("pd.b", {c.pd_classes});
}

void Model::initialize(const corpus::EmbeddingTable* embeddings) {
  const double s = config_.init_scale;
  for (auto& [name, p] : params_.all()) {
    const bool bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    if (bias) {
      p.value.fill(0.0);
      const bool lstm = name.rfind("enc.", 0) == 0 || name.rfind("ner.fwd", 0) == 0 || name.rfind("ner.bwd", 0) == 0;
      if (lstm) {
        const std::size_t h = config_.hidden;
        for (std::size_t k = h; k < 2 * h; ++k) p.value[k] = config_.forget_bias;
      }
      continue;
    }
    for (auto& x : p.value.data) x = nn::uniform(rng_, -s, s);
  }
  auto& we = params_.get("word_emb").value;
  if (embeddings) {
    if (embeddings->dim != config_.word_dim) {
      throw UsageError("embedding width " + std::to_string(embeddings->dim) + " does not match word_dim " +
                       std::to_string(config_.word_dim));
    }
    for (std::size_t i = 0; i < vocab_.word_count(); ++i) {
      if (auto r = embeddings->find(vocab_.words()[i])) std::copy_n(embeddings->row(*r), config_.word_dim, we.row(i));
    }
  }
  std::fill_n(we.row(kPadId), config_.word_dim, 0.0);
  auto& ce = params_.get("char_emb").value;
  std::fill_n(ce.row(kPadId), config_.char_dim, 0.0);
}

void Model::run_audit() {
  Input probe;
  probe.length = 1;
  probe.words.assign(config_.max_sentence_len, kPadId);
  probe.words[0] = kUnkId;
  probe.chars.assign(config_.max_sentence_len * config_.max_word_len, kPadId);
  probe.chars[0] = kUnkId;
  Graph g;
  Context ctx = context(g, probe, false);
  const auto& cv = g.value(ctx.C);
  // The char composition is the slice of the encoder input past the word embedding.
  ShapeAudit a;
  a.char_composition = params_.get("enc.fwd.wx").value.dim(1) - config_.word_dim;
  a.context = cv.dim(1);
  Var logits = ner_logits(g, ctx, false);
  a.ner_hidden = params_.get("ner.out.w").value.dim(1);
  a.ner_classes = g.value(logits).dim(1);
  Var v = outcome_vector(g, ctx, probe, 1.0, false);
  a.rel = g.value(v).size();
  a.pk_classes = g.value(pk_logits(g, v)).size();
  a.pd_classes = g.value(pd_logits(g, v)).size();

  auto expect = [](std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
      throw ShapeError(std::string("shape audit: ") + what + " is " + std::to_string(got) + ", expected " +
                       std::to_string(want));
    }
  };
  expect(a.char_composition, config_.char_filters, "char composition length");
  expect(a.context, config_.context_dim(), "context width");
  expect(a.ner_hidden, config_.ner_dim(), "NER hidden width");
  expect(a.rel, config_.rel_dim(), "outcome vector length");
  expect(a.ner_classes, config_.ner_classes, "NER class count");
  expect(a.pk_classes, config_.pk_classes, "PK class count");
  expect(a.pd_classes, config_.pd_classes, "PD class count");
  audit_ = a;
}

Input Model::make_input(const std::vector<tagging::Token>& tokens) const {
  const std::size_t n = config_.max_sentence_len;
  const std::size_t m = config_.max_word_len;
  if (tokens.size() > n) {
    throw ShapeError("sentence has " + std::to_string(tokens.size()) + " tokens, model maximum is " +
                     std::to_string(n));
  }
  Input in;
  in.length = tokens.size();
  in.words.assign(n, kPadId);
  in.chars.assign(n * m, kPadId);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    in.words[i] = vocab_.word_id(tokens[i].text);
    const auto cps = utf8::decode(tokens[i].text);
    for (std::size_t j = 0; j < cps.size() && j < m; ++j) in.chars[i * m + j] = vocab_.char_id(cps[j]);
  }
  return in;
}

Context Model::context(Graph& g, const Input& in, bool train) {
  const std::size_t n = config_.max_sentence_len;
  const std::size_t m = config_.max_word_len;
  if (in.words.size() != n || in.chars.size() != n * m || in.length > n) {
    throw ShapeError("context: input is not padded to the configured n x m");
  }
  Context ctx;
  ctx.length = in.length;
  ctx.S = g.lookup(params_.get("word_emb"), in.words, in.length);
  Var ch = g.lookup(params_.get("char_emb"), in.chars, in.chars.size());
  ch = g.reshape(ch, {n, m, config_.char_dim});
  Var cc = g.conv_maxpool(ch, params_.get("char_conv.w"), params_.get("char_conv.b"), config_.char_window);
  cc = g.mask_rows(cc, in.length);
  const Var x[] = {ctx.S, cc};
  Var enc_in = g.concat(x);
  Var f = g.lstm(enc_in, params_.get("enc.fwd.wx"), params_.get("enc.fwd.wh"), params_.get("enc.fwd.b"), in.length,
                 false);
  Var b = g.lstm(enc_in, params_.get("enc.bwd.wx"), params_.get("enc.bwd.wh"), params_.get("enc.bwd.b"), in.length,
                 true);
  const Var fb[] = {f, b};
  ctx.C = g.concat(fb);
  if (train) ctx.C = g.dropout(ctx.C, config_.dropout, rng_);
  return ctx;
}

Var Model::ner_logits(Graph& g, const Context& ctx, bool train) {
  Var in = ctx.C;
  if (config_.residual_words) {
    const Var parts[] = {ctx.C, ctx.S};
    in = g.concat(parts);
  }
  Var f = g.lstm(in, params_.get("ner.fwd.wx"), params_.get("ner.fwd.wh"), params_.get("ner.fwd.b"), ctx.length, false);
  Var b = g.lstm(in, params_.get("ner.bwd.wx"), params_.get("ner.bwd.wh"), params_.get("ner.bwd.b"), ctx.length, true);
  const Var fb[] = {f, b};
  Var r = g.concat(fb);
  if (train) r = g.dropout(r, config_.dropout, rng_);
  return g.affine(r, params_.get("ner.out.w"), params_.get("ner.out.b"));
}

Var Model::outcome_vector(Graph& g, const Context& ctx, const Input& bound, double encoder_grad_scale, bool train) {
  if (bound.words.size() != config_.max_sentence_len) throw ShapeError("outcome_vector: bound input is not padded to n");
  Var sp = g.lookup(params_.get("word_emb"), bound.words, bound.length);
  const Var rows[] = {g.scale_grad(ctx.C, encoder_grad_scale), g.scale_grad(sp, encoder_grad_scale)};
  Var x = g.concat(rows);
  std::vector<Var> pooled;
  for (auto k : config_.rel_windows) {
    const std::string p = "rel.conv" + std::to_string(k);
    pooled.push_back(g.conv_maxpool(x, params_.get(p + ".w"), params_.get(p + ".b"), k));
  }
  Var v = g.concat(pooled);
  if (train) v = g.dropout(v, config_.dropout, rng_);
  return v;
}

Var Model::pk_logits(Graph& g, Var v) { return g.affine(v, params_.get("pk.w"), params_.get("pk.b")); }

Var Model::pd_logits(Graph& g, Var v) { return g.affine(v, params_.get("pd.w"), params_.get("pd.b")); }

std::vector<std::array<double, tagging::kTagCount>> Model::tag_distribution(const Input& in) {
  Graph g;
  Context ctx = context(g, in, false);
  const auto& logits = g.value(ner_logits(g, ctx, false));
  std::vector<std::array<double, tagging::kTagCount>> out(in.length);
  for (std::size_t i = 0; i < in.length; ++i) {
    auto p = nn::softmax(std::span<const double>(logits.row(i), tagging::kTagCount));
    std::copy(p.begin(), p.end(), out[i].begin());
  }
  return out;
}

// ---------------------------------------------------------------- losses

Var ner_loss(Graph& g, Var logits, const std::vector<int>& tags, std::size_t length, double non_o_weight,
             double example_weight) {
  const std::size_t n = g.value(logits).dim(0);
  if (tags.size() < length || length > n) throw ShapeError("ner_loss: tag count does not cover the sentence");
  std::vector<int> targets(n, 0);
  std::vector<double> weights(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    targets[i] = tags[i];
    weights[i] = tags[i] == 0 ? 1.0 : non_o_weight;
    total += weights[i];
  }
  if (total == 0.0) throw ShapeError("ner_loss: empty sentence");
  return g.scale(g.cross_entropy(logits, targets, weights, total), example_weight);
}

Var outcome_loss(Graph& g, Var logits, int target, double example_weight) {
  const int t[] = {target};
  const double w[] = {1.0};
  return g.scale(g.cross_entropy(logits, t, w, 1.0), example_weight);
}

}  // namespace ddi::model
