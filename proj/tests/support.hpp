#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ddi/model.hpp"
#include "ddi/nn/graph.hpp"
#include "ddi/tagging.hpp"

namespace ddi::testing {

/// A tiny network: d=6, d_char=4, h=3, n=5, m=4, three filters per window, no dropout.
inline model::ModelConfig micro_config() {
  model::ModelConfig c;
  c.word_dim = 6;
  c.char_dim = 4;
  c.char_filters = 3;
  c.char_window = 3;
  c.hidden = 3;
  c.rel_windows = {3, 4, 5};
  c.rel_filters = 3;
  c.pk_classes = 20;
  c.dropout = 0.0;
  c.max_sentence_len = 5;
  c.max_word_len = 4;
  c.init_scale = 0.5;
  return c;
}

struct MicroExample {
  model::Input input;
  model::Input bound;
  std::vector<int> tags;
  int pk_target = 0;
  int pd_target = 0;
};

inline std::vector<tagging::Token> micro_tokens() {
  return tagging::tokenize("LABELDRUG with abc may xyz");
}

inline model::Model micro_model(std::uint64_t seed = 3) {
  auto toks = micro_tokens();
  auto extra = tagging::tokenize("raises INR .");
  return model::Model(micro_config(), model::Vocabulary::build({toks, extra}), CodeVocabulary::placeholder(), seed);
}

inline MicroExample micro_example(const model::Model& m) {
  const auto toks = micro_tokens();
  MicroExample ex;
  ex.input = m.make_input(toks);
  ex.bound = m.make_input(tagging::entity_bind(toks, tagging::TokenRange{2, 3}, tagging::TokenRange{4, 5}));
  using tagging::Tag;
  for (Tag t : {Tag::O, Tag::O, Tag::B_D, Tag::B_T, Tag::B_E}) ex.tags.push_back(static_cast<int>(t));
  ex.pk_target = 7;
  ex.pd_target = 1;
  return ex;
}

/// The three task losses on one graph, in NER, PK, PD order.
inline std::vector<nn::Var> micro_losses(model::Model& m, nn::Graph& g, const MicroExample& ex,
                                         double encoder_grad_scale, double non_o_weight = 10.0) {
  auto ctx = m.context(g, ex.input, true);
  auto ner = model::ner_loss(g, m.ner_logits(g, ctx, true), ex.tags, ex.input.length, non_o_weight, 3.0);
  auto v = m.outcome_vector(g, ctx, ex.bound, encoder_grad_scale, true);
  auto pk = model::outcome_loss(g, m.pk_logits(g, v), ex.pk_target, 3.0);
  auto pd = model::outcome_loss(g, m.pd_logits(g, v), ex.pd_target, 3.0);
  return {ner, pk, pd};
}

inline double micro_total(model::Model& m, const MicroExample& ex) {
  nn::Graph g;
  double total = 0.0;
  for (auto l : micro_losses(m, g, ex, 1.0)) total += g.value(l)[0];
  return total;
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t entries = 0;
};

/// Central differences with step eps against the accumulated analytic
/// gradient. Relative error is |a - n| / max(|a| + |n|, floor); the floor
/// sits at the resolution of a float64 central difference on this loss, so
/// entries below it are held to an absolute error of about 1e-9.
inline constexpr double kGradFloor = 1e-5;
inline GradCheck check_gradients(model::Model& m, const MicroExample& ex, double eps = 1e-5) {
  m.params().zero_grad();
  {
    nn::Graph g;
    for (auto l : micro_losses(m, g, ex, 1.0)) g.backward(l);
  }
  GradCheck out;
  for (auto& [name, p] : m.params().all()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = micro_total(m, ex);
      p.value[i] = saved - eps;
      const double down = micro_total(m, ex);
      p.value[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p.grad[i];
      const double rel =
          std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), kGradFloor);
      ++out.entries;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

/// Parameters on the encoder side of the outcome branch's gradient scaling.
inline bool is_encoder_param(const std::string& name) {
  return name == "word_emb" || name == "char_emb" || name.rfind("char_conv", 0) == 0 || name.rfind("enc.", 0) == 0;
}

/// Largest |g_scaled - factor * g_full| over encoder parameters, where the
/// gradients come from the PK and PD losses alone.
inline double outcome_gradient_ratio_error(model::Model& m, const MicroExample& ex, double factor) {
  auto outcome_grads = [&](double scale) {
    m.params().zero_grad();
    nn::Graph g;
    auto losses = micro_losses(m, g, ex, scale);
    g.backward(losses[1]);
    g.backward(losses[2]);
    std::vector<double> flat;
    for (auto& [name, p] : m.params().all())
      if (is_encoder_param(name)) flat.insert(flat.end(), p.grad.data.begin(), p.grad.data.end());
    return flat;
  };
  const auto full = outcome_grads(1.0);
  const auto scaled = outcome_grads(factor);
  double worst = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    worst = std::max(worst, std::abs(scaled[i] - factor * full[i]));
    norm = std::max(norm, std::abs(full[i]));
  }
  return norm > 0.0 ? worst : 1.0;
}

}  // namespace ddi::testing
